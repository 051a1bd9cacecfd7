#include "emde/model.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "emde/common.hpp"

namespace emde {

namespace {

constexpr const char* kModelMagic = "emde-model";
constexpr int kModelVersion = 1;

struct LayerCache {
  Matrix input;
  Matrix xhat;   // normalized pre-activation (batch norm only)
  Vector inv_std;
  Matrix pre;    // input to the activation
};

double leaky(double x, double slope) { return x > 0.0 ? x : slope * x; }

Matrix apply_layer(DenseLayer& layer, const ModelSpec& spec, const Matrix& x, Mode mode, LayerCache* cache) {
  Matrix z = x * layer.weight.transpose();
  z.rowwise() += layer.bias.transpose();
  Matrix pre;
  if (layer.batch_norm) {
    const auto rows = static_cast<double>(z.rows());
    Vector mean, var;
    if (mode == Mode::train) {
      mean = z.colwise().mean().transpose();
      var = (z.rowwise() - mean.transpose()).array().square().colwise().sum().transpose() / rows;
      const double unbias = z.rows() > 1 ? rows / (rows - 1.0) : 1.0;
      layer.running_mean = (1.0 - spec.bn_momentum) * layer.running_mean + spec.bn_momentum * mean;
      layer.running_var = (1.0 - spec.bn_momentum) * layer.running_var + spec.bn_momentum * unbias * var;
    } else {
      mean = layer.running_mean;
      var = layer.running_var;
    }
    Vector inv_std = (var.array() + spec.bn_eps).rsqrt();
    Matrix xhat = (z.rowwise() - mean.transpose()).array().rowwise() * inv_std.transpose().array();
    pre = (xhat.array().rowwise() * layer.bn_scale.transpose().array()).rowwise() + layer.bn_shift.transpose().array();
    if (cache) {
      cache->xhat = std::move(xhat);
      cache->inv_std = std::move(inv_std);
    }
  } else {
    pre = std::move(z);
  }
  Matrix out = layer.activation ? Matrix(pre.unaryExpr([&](double v) { return leaky(v, spec.leaky_slope); })) : pre;
  if (layer.residual) out += x;
  if (cache) {
    cache->input = x;
    cache->pre = std::move(pre);
  }
  return out;
}

void check_input(const ModelParams& params, const Matrix& inputs) {
  if (static_cast<std::size_t>(inputs.cols()) != params.spec.input_size) {
    fail(ErrorKind::shape, "model expects input of length " + std::to_string(params.spec.input_size) + ", got " +
                               std::to_string(inputs.cols()));
  }
}

}  // namespace

std::vector<std::span<double>> ModelParams::trainable() {
  std::vector<std::span<double>> out;
  for (auto& l : layers) {
    out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    if (l.batch_norm) {
      out.emplace_back(l.bn_scale.data(), static_cast<std::size_t>(l.bn_scale.size()));
      out.emplace_back(l.bn_shift.data(), static_cast<std::size_t>(l.bn_shift.size()));
    }
  }
  return out;
}

std::vector<std::span<const double>> ModelParams::trainable() const {
  auto mut = const_cast<ModelParams*>(this)->trainable();
  return {mut.begin(), mut.end()};
}

std::size_t ModelParams::trainable_count() const {
  std::size_t n = 0;
  for (auto s : trainable()) n += s.size();
  return n;
}

ModelParams init_model(const ModelSpec& spec, std::uint64_t seed, std::vector<InputChannel> channels) {
  if (spec.input_size == 0 || spec.output_depth < 1 || spec.output_width < 1) {
    fail(ErrorKind::invalid_argument, "model input and output sizes must be positive");
  }
  if (spec.hidden_layers < 0 || (spec.hidden_layers > 0 && spec.hidden_width == 0)) {
    fail(ErrorKind::invalid_argument, "bad hidden layer configuration");
  }
  if (!channels.empty()) {
    std::size_t total = 0;
    for (const auto& c : channels) total += c.size;
    if (total != spec.input_size) fail(ErrorKind::shape, "input channels do not add up to the input size");
  }
  ModelParams p;
  p.spec = spec;
  p.channels = std::move(channels);
  Rng rng(seed);
  auto make = [&](std::size_t in, std::size_t out, double gain) {
    DenseLayer l;
    l.weight.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    const double scale = std::sqrt(gain / static_cast<double>(in));
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = rng.normal() * scale;
    l.bias = Vector::Zero(static_cast<Eigen::Index>(out));
    return l;
  };
  std::size_t width = spec.input_size;
  for (int h = 0; h < spec.hidden_layers; ++h) {
    DenseLayer l = make(width, spec.hidden_width, 2.0);
    if (spec.batch_norm) {
      const auto n = static_cast<Eigen::Index>(spec.hidden_width);
      l.batch_norm = true;
      l.bn_scale = Vector::Ones(n);
      l.bn_shift = Vector::Zero(n);
      l.running_mean = Vector::Zero(n);
      l.running_var = Vector::Ones(n);
    }
    l.activation = true;
    l.residual = spec.residual && h > 0;
    p.layers.push_back(std::move(l));
    width = spec.hidden_width;
  }
  DenseLayer out = make(width, spec.output_size(), 1.0);
  out.activation = false;
  p.layers.push_back(std::move(out));
  return p;
}

Matrix forward(ModelParams& params, const Matrix& inputs, Mode mode) {
  check_input(params, inputs);
  Matrix x = inputs;
  for (auto& layer : params.layers) x = apply_layer(layer, params.spec, x, mode, nullptr);
  return x;
}

Matrix predict(const ModelParams& params, const Matrix& inputs) {
  // Eval mode does not write to the layers.
  return forward(const_cast<ModelParams&>(params), inputs, Mode::eval);
}

std::vector<double> forward_one(const ModelParams& params, std::span<const double> input) {
  Matrix x(1, static_cast<Eigen::Index>(input.size()));
  for (std::size_t i = 0; i < input.size(); ++i) x(0, static_cast<Eigen::Index>(i)) = input[i];
  Matrix y = predict(params, x);
  return {y.data(), y.data() + y.size()};
}

double kl_sketch_loss(std::span<const double> logits, std::span<const double> target, int depth, int width) {
  const std::size_t n = static_cast<std::size_t>(depth) * width;
  if (logits.size() != n || target.size() != n) fail(ErrorKind::shape, "loss: logits/target length mismatch");
  double total = 0.0;
  int active = 0;
  for (int d = 0; d < depth; ++d) {
    const double* t = target.data() + static_cast<std::size_t>(d) * width;
    const double* l = logits.data() + static_cast<std::size_t>(d) * width;
    double mass = 0.0;
    for (int c = 0; c < width; ++c) mass += t[c];
    if (mass <= 0.0) continue;
    double mx = l[0];
    for (int c = 1; c < width; ++c) mx = std::max(mx, l[c]);
    double sum = 0.0;
    for (int c = 0; c < width; ++c) sum += std::exp(l[c] - mx);
    const double lse = mx + std::log(sum);
    double kl = 0.0;
    for (int c = 0; c < width; ++c) {
      if (t[c] <= 0.0) continue;
      const double p = t[c] / mass;
      kl += p * (std::log(p) - (l[c] - lse));
    }
    total += kl;
    ++active;
  }
  return active == 0 ? 0.0 : total / active;
}

double kl_sketch_loss_grad(const Matrix& logits, const Matrix& targets, int depth, int width, Matrix& grad) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols() ||
      logits.cols() != static_cast<Eigen::Index>(depth) * width) {
    fail(ErrorKind::shape, "loss: logits/target shape mismatch");
  }
  const Eigen::Index rows = logits.rows();
  grad = Matrix::Zero(rows, logits.cols());
  double total = 0.0;
  std::vector<double> q(static_cast<std::size_t>(width));
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double* lrow = logits.data() + r * logits.cols();
    const double* trow = targets.data() + r * targets.cols();
    total += kl_sketch_loss({lrow, static_cast<std::size_t>(logits.cols())},
                            {trow, static_cast<std::size_t>(targets.cols())}, depth, width);
    int active = 0;
    for (int d = 0; d < depth; ++d) {
      double mass = 0.0;
      for (int c = 0; c < width; ++c) mass += trow[d * width + c];
      if (mass > 0.0) ++active;
    }
    if (active == 0) continue;
    const double scale = 1.0 / (static_cast<double>(active) * static_cast<double>(rows));
    for (int d = 0; d < depth; ++d) {
      const double* t = trow + d * width;
      const double* l = lrow + d * width;
      double mass = 0.0;
      for (int c = 0; c < width; ++c) mass += t[c];
      if (mass <= 0.0) continue;
      double mx = l[0];
      for (int c = 1; c < width; ++c) mx = std::max(mx, l[c]);
      double sum = 0.0;
      for (int c = 0; c < width; ++c) {
        q[c] = std::exp(l[c] - mx);
        sum += q[c];
      }
      for (int c = 0; c < width; ++c) grad(r, d * width + c) = (q[c] / sum - t[c] / mass) * scale;
    }
  }
  return total / static_cast<double>(rows);
}

LossAndGrad loss_and_gradients(ModelParams& params, const Matrix& inputs, const Matrix& targets, Mode mode) {
  check_input(params, inputs);
  const ModelSpec& spec = params.spec;
  std::vector<LayerCache> caches(params.layers.size());
  Matrix x = inputs;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    x = apply_layer(params.layers[i], spec, x, mode, &caches[i]);
  }
  LossAndGrad result;
  Matrix grad;
  result.loss = kl_sketch_loss_grad(x, targets, spec.output_depth, spec.output_width, grad);

  // Per-layer gradients, filled back to front, then flattened in trainable() order.
  struct LayerGrad {
    Matrix weight;
    Vector bias, scale, shift;
  };
  std::vector<LayerGrad> lg(params.layers.size());
  const double rows = static_cast<double>(inputs.rows());
  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const DenseLayer& layer = params.layers[li];
    const LayerCache& c = caches[li];
    Matrix d_out = grad;
    Matrix d_pre = d_out;
    if (layer.activation) {
      d_pre = d_out.array() * c.pre.unaryExpr([&](double v) { return v > 0.0 ? 1.0 : spec.leaky_slope; }).array();
    }
    Matrix d_z;
    if (layer.batch_norm) {
      lg[li].scale = (d_pre.array() * c.xhat.array()).colwise().sum().transpose();
      lg[li].shift = d_pre.colwise().sum().transpose();
      Matrix d_xhat = d_pre.array().rowwise() * layer.bn_scale.transpose().array();
      if (mode == Mode::train) {
        Eigen::RowVectorXd sum_dx = d_xhat.colwise().sum();
        Eigen::RowVectorXd sum_dx_x = (d_xhat.array() * c.xhat.array()).colwise().sum();
        Matrix centred = (d_xhat * rows).rowwise() - sum_dx;
        centred -= (c.xhat.array().rowwise() * sum_dx_x.array()).matrix();
        d_z = (centred.array().rowwise() * (c.inv_std.transpose().array() / rows)).matrix();
      } else {
        d_z = d_xhat.array().rowwise() * c.inv_std.transpose().array();
      }
    } else {
      d_z = d_pre;
    }
    lg[li].weight = d_z.transpose() * c.input;
    lg[li].bias = d_z.colwise().sum().transpose();
    grad = d_z * layer.weight;
    if (layer.residual) grad += d_out;
  }
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    auto push = [&](const auto& m) { result.grads.emplace_back(m.data(), m.data() + m.size()); };
    push(lg[li].weight);
    push(lg[li].bias);
    if (params.layers[li].batch_norm) {
      push(lg[li].scale);
      push(lg[li].shift);
    }
  }
  return result;
}

void TrainConfig::validate() const {
  if (epochs < 1) fail(ErrorKind::invalid_argument, "epochs must be >= 1");
  if (batch_size < 1) fail(ErrorKind::invalid_argument, "batch_size must be >= 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) fail(ErrorKind::invalid_argument, "gamma must be in (0, 1]");
  if (!(learning_rate >= 0.0)) fail(ErrorKind::invalid_argument, "learning_rate must be >= 0");
}

double TrainConfig::lr_for_epoch(int epoch) const {
  double lr = learning_rate;
  for (int e = 1; e < epoch; ++e) lr *= gamma;
  return lr;
}

double backward_and_step(ModelParams& params, const Matrix& inputs, const Matrix& targets,
                         const TrainConfig& config, double learning_rate, AdamState& state) {
  std::vector<Vector> saved_mean, saved_var;
  for (const auto& l : params.layers) {
    saved_mean.push_back(l.running_mean);
    saved_var.push_back(l.running_var);
  }
  LossAndGrad lg = loss_and_gradients(params, inputs, targets, Mode::train);
  bool finite = std::isfinite(lg.loss);
  for (const auto& g : lg.grads) {
    for (double v : g) finite = finite && std::isfinite(v);
  }
  if (!finite) {
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
      params.layers[i].running_mean = saved_mean[i];
      params.layers[i].running_var = saved_var[i];
    }
    fail(ErrorKind::numeric, "non-finite loss or gradient at optimizer step " + std::to_string(state.step + 1) +
                                 " (loss = " + format_double(lg.loss) + "); step skipped");
  }

  auto blocks = params.trainable();
  if (state.m.empty()) {
    for (auto b : blocks) {
      state.m.emplace_back(b.size(), 0.0);
      state.v.emplace_back(b.size(), 0.0);
    }
  }
  if (state.m.size() != blocks.size()) fail(ErrorKind::shape, "optimizer state does not match model");
  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    auto& m = state.m[b];
    auto& v = state.v[b];
    const auto& g = lg.grads[b];
    for (std::size_t i = 0; i < blocks[b].size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      blocks[b][i] -= learning_rate * mhat / (std::sqrt(vhat) + config.adam_eps);
    }
  }
  return lg.loss;
}

TrainState start_training(const ModelSpec& spec, std::uint64_t seed, std::vector<InputChannel> channels) {
  TrainState s;
  s.params = init_model(spec, seed, std::move(channels));
  return s;
}

void train(TrainState& state, const Matrix& inputs, const Matrix& targets, const TrainConfig& config,
           int max_epochs, const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  if (inputs.rows() == 0) fail(ErrorKind::invalid_argument, "empty training set");
  if (inputs.rows() != targets.rows()) fail(ErrorKind::shape, "inputs and targets differ in row count");
  const auto n = static_cast<std::size_t>(inputs.rows());
  int last = config.epochs;
  if (max_epochs > 0) last = std::min(last, state.epochs_done + max_epochs);
  std::vector<std::size_t> order(n);
  Matrix xb, tb;
  for (int epoch = state.epochs_done + 1; epoch <= last; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    const double lr = config.lr_for_epoch(epoch);
    double weighted = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      const auto rows = static_cast<Eigen::Index>(end - start);
      xb.resize(rows, inputs.cols());
      tb.resize(rows, targets.cols());
      for (std::size_t i = start; i < end; ++i) {
        const auto r = static_cast<Eigen::Index>(i - start);
        xb.row(r) = inputs.row(static_cast<Eigen::Index>(order[i]));
        tb.row(r) = targets.row(static_cast<Eigen::Index>(order[i]));
      }
      weighted += backward_and_step(state.params, xb, tb, config, lr, state.adam) * static_cast<double>(rows);
    }
    EpochRecord rec{epoch, weighted / static_cast<double>(n), lr};
    state.history.push_back(rec);
    state.epochs_done = epoch;
    if (on_epoch) on_epoch(rec);
  }
}

namespace {

void write_values(std::ostream& out, std::span<const double> v) {
  out << v.size();
  for (double x : v) out << ' ' << format_double(x);
  out << '\n';
}

std::vector<double> read_values(std::istream& in) {
  std::size_t n = 0;
  if (!(in >> n)) fail(ErrorKind::format, "checkpoint: truncated");
  std::vector<double> v(n);
  std::string tok;
  for (double& x : v) {
    if (!(in >> tok)) fail(ErrorKind::format, "checkpoint: truncated");
    x = parse_double(tok);
  }
  return v;
}

template <typename T>
void expect(std::istream& in, const char* key, T& value) {
  std::string k;
  if (!(in >> k >> value) || k != key) fail(ErrorKind::format, std::string("checkpoint: expected '") + key + "'");
}

void read_into(std::istream& in, double* dst, std::size_t n) {
  auto v = read_values(in);
  if (v.size() != n) fail(ErrorKind::format, "checkpoint: tensor size mismatch");
  std::copy(v.begin(), v.end(), dst);
}

}  // namespace

void write_checkpoint(const TrainState& state, std::ostream& out) {
  const ModelParams& p = state.params;
  const ModelSpec& s = p.spec;
  out << kModelMagic << ' ' << kModelVersion << '\n';
  out << "input_size " << s.input_size << "\noutput_depth " << s.output_depth << "\noutput_width "
      << s.output_width << "\nhidden_layers " << s.hidden_layers << "\nhidden_width " << s.hidden_width
      << "\nresidual " << s.residual << "\nbatch_norm " << s.batch_norm << "\nleaky_slope "
      << format_double(s.leaky_slope) << "\nbn_momentum " << format_double(s.bn_momentum) << "\nbn_eps "
      << format_double(s.bn_eps) << '\n';
  out << "channels " << p.channels.size() << '\n';
  for (const auto& c : p.channels) out << c.name << ' ' << c.size << '\n';
  out << "layers " << p.layers.size() << '\n';
  for (const auto& l : p.layers) {
    out << "layer " << l.in() << ' ' << l.out() << ' ' << l.batch_norm << ' ' << l.activation << ' ' << l.residual
        << '\n';
    write_values(out, {l.weight.data(), static_cast<std::size_t>(l.weight.size())});
    write_values(out, {l.bias.data(), static_cast<std::size_t>(l.bias.size())});
    if (l.batch_norm) {
      for (const Vector* v : {&l.bn_scale, &l.bn_shift, &l.running_mean, &l.running_var}) {
        write_values(out, {v->data(), static_cast<std::size_t>(v->size())});
      }
    }
  }
  out << "adam_step " << state.adam.step << '\n';
  out << "adam_blocks " << state.adam.m.size() << '\n';
  for (std::size_t b = 0; b < state.adam.m.size(); ++b) {
    write_values(out, state.adam.m[b]);
    write_values(out, state.adam.v[b]);
  }
  out << "epochs_done " << state.epochs_done << '\n';
  out << "history " << state.history.size() << '\n';
  for (const auto& h : state.history) {
    out << h.epoch << ' ' << format_double(h.loss) << ' ' << format_double(h.lr) << '\n';
  }
}

TrainState read_checkpoint(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kModelMagic) fail(ErrorKind::format, "not an emde model checkpoint");
  if (version != kModelVersion) {
    fail(ErrorKind::format, "checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                                std::to_string(kModelVersion) + ")");
  }
  TrainState state;
  ModelParams& p = state.params;
  ModelSpec& s = p.spec;
  std::string tok;
  expect(in, "input_size", s.input_size);
  expect(in, "output_depth", s.output_depth);
  expect(in, "output_width", s.output_width);
  expect(in, "hidden_layers", s.hidden_layers);
  expect(in, "hidden_width", s.hidden_width);
  expect(in, "residual", s.residual);
  expect(in, "batch_norm", s.batch_norm);
  expect(in, "leaky_slope", tok);
  s.leaky_slope = parse_double(tok);
  expect(in, "bn_momentum", tok);
  s.bn_momentum = parse_double(tok);
  expect(in, "bn_eps", tok);
  s.bn_eps = parse_double(tok);
  std::size_t n = 0;
  expect(in, "channels", n);
  for (std::size_t i = 0; i < n; ++i) {
    InputChannel c;
    if (!(in >> c.name >> c.size)) fail(ErrorKind::format, "checkpoint: bad channel entry");
    p.channels.push_back(c);
  }
  expect(in, "layers", n);
  for (std::size_t i = 0; i < n; ++i) {
    DenseLayer l;
    std::size_t lin = 0, lout = 0;
    expect(in, "layer", lin);
    if (!(in >> lout >> l.batch_norm >> l.activation >> l.residual)) fail(ErrorKind::format, "checkpoint: bad layer");
    const auto r = static_cast<Eigen::Index>(lout);
    l.weight.resize(r, static_cast<Eigen::Index>(lin));
    read_into(in, l.weight.data(), lin * lout);
    l.bias.resize(r);
    read_into(in, l.bias.data(), lout);
    if (l.batch_norm) {
      for (Vector* v : {&l.bn_scale, &l.bn_shift, &l.running_mean, &l.running_var}) {
        v->resize(r);
        read_into(in, v->data(), lout);
      }
    }
    p.layers.push_back(std::move(l));
  }
  if (p.layers.empty() || p.layers.front().in() != s.input_size || p.layers.back().out() != s.output_size()) {
    fail(ErrorKind::format, "checkpoint: layer shapes disagree with the model spec");
  }
  expect(in, "adam_step", state.adam.step);
  expect(in, "adam_blocks", n);
  for (std::size_t b = 0; b < n; ++b) {
    state.adam.m.push_back(read_values(in));
    state.adam.v.push_back(read_values(in));
  }
  expect(in, "epochs_done", state.epochs_done);
  expect(in, "history", n);
  for (std::size_t i = 0; i < n; ++i) {
    EpochRecord h{};
    std::string loss, lr;
    if (!(in >> h.epoch >> loss >> lr)) fail(ErrorKind::format, "checkpoint: bad history");
    h.loss = parse_double(loss);
    h.lr = parse_double(lr);
    state.history.push_back(h);
  }
  return state;
}

void save_checkpoint(const TrainState& state, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write '" + path + "'");
  write_checkpoint(state, out);
}

TrainState load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

void write_loss_csv(const std::vector<EpochRecord>& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write '" + path + "'");
  out << "epoch,loss,lr\n";
  for (const auto& h : history) out << h.epoch << ',' << format_double(h.loss) << ',' << format_double(h.lr) << '\n';
}

}  // namespace emde
