#include "emde/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "emde/common.hpp"

namespace emde {

namespace {
constexpr const char* kSketchMagic = "emde-sketch";
constexpr int kSketchVersion = 1;

void require_shape(int depth, int width) {
  if (depth < 1 || width < 1) fail(ErrorKind::invalid_argument, "sketch depth and width must be >= 1");
}
}  // namespace

Sketch::Sketch(int depth, int width) : depth_(depth), width_(width) {
  require_shape(depth, width);
  values_.assign(static_cast<std::size_t>(depth) * width, 0.0);
}

Sketch::Sketch(int depth, int width, std::vector<double> values)
    : depth_(depth), width_(width), values_(std::move(values)) {
  require_shape(depth, width);
  if (values_.size() != static_cast<std::size_t>(depth) * width) {
    fail(ErrorKind::shape, "sketch values length must equal depth * width");
  }
}

void Sketch::add_scaled(const Sketch& other, double weight) {
  if (!same_shape(other)) fail(ErrorKind::shape, "sketch shape mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += weight * other.values_[i];
}

Aggregator parse_aggregator(const std::string& name) {
  if (name == "gmean") return Aggregator::gmean;
  if (name == "min") return Aggregator::min;
  if (name == "mean") return Aggregator::mean;
  if (name == "hmean") return Aggregator::hmean;
  fail(ErrorKind::invalid_argument, "unknown aggregator '" + name + "' (gmean|min|mean|hmean)");
}

std::string to_string(Aggregator a) {
  switch (a) {
    case Aggregator::gmean: return "gmean";
    case Aggregator::min: return "min";
    case Aggregator::mean: return "mean";
    case Aggregator::hmean: return "hmean";
  }
  return "?";
}

void accumulate_row(Sketch& s, const CodesMatrix& codes, std::size_t row, double weight) {
  if (s.depth() != codes.depth() || s.width() != codes.width()) {
    fail(ErrorKind::shape, "sketch shape does not match codes");
  }
  auto r = codes.row(row);
  for (int d = 0; d < codes.depth(); ++d) s.at(d, r[d]) += weight;
}

Sketch encode_row(const CodesMatrix& codes, std::size_t row) {
  Sketch s(codes.depth(), codes.width());
  accumulate_row(s, codes, row, 1.0);
  return s;
}

Sketch encode_item(const CodesMatrix& codes, const std::string& item_id) {
  return encode_row(codes, codes.index_of(item_id));
}

Sketch aggregate(std::span<const Sketch> sketches, std::span<const double> weights) {
  if (sketches.size() != weights.size()) fail(ErrorKind::shape, "aggregate: one weight per sketch required");
  if (sketches.empty()) fail(ErrorKind::invalid_argument, "aggregate: no sketches");
  Sketch out(sketches[0].depth(), sketches[0].width());
  for (std::size_t j = 0; j < sketches.size(); ++j) {
    if (weights[j] < 0.0 || !std::isfinite(weights[j])) {
      fail(ErrorKind::invalid_argument, "aggregate: weights must be finite and non-negative");
    }
    out.add_scaled(sketches[j], weights[j]);
  }
  return out;
}

void normalize_in_place(Sketch& s, Norm norm) {
  for (int d = 0; d < s.depth(); ++d) {
    auto slice = s.slice(d);
    double total = 0.0;
    if (norm == Norm::l1) {
      for (double x : slice) total += std::abs(x);
    } else {
      for (double x : slice) total += x * x;
      total = std::sqrt(total);
    }
    if (total == 0.0) continue;
    for (double& x : slice) x /= total;
  }
}

Sketch normalize(const Sketch& s, Norm norm) {
  Sketch out = s;
  normalize_in_place(out, norm);
  return out;
}

double decay_factor(double alpha, double w, double dt) {
  if (!(dt >= 0.0)) fail(ErrorKind::invalid_argument, "decay: dt must be non-negative");
  return alpha * std::pow(w, dt);
}

Sketch decay(const Sketch& s, double alpha, double w, double dt) {
  const double f = decay_factor(alpha, w, dt);
  Sketch out = s;
  for (double& x : out.values()) x *= f;
  return out;
}

double reduce_estimates(std::span<const double> values, Aggregator agg) {
  if (values.empty()) fail(ErrorKind::invalid_argument, "no estimates to reduce");
  if (values.size() == 1) return values[0];
  const double n = static_cast<double>(values.size());
  switch (agg) {
    case Aggregator::min:
      return *std::min_element(values.begin(), values.end());
    case Aggregator::mean: {
      double s = 0.0;
      for (double v : values) s += v;
      return s / n;
    }
    case Aggregator::gmean: {
      double s = 0.0;
      for (double v : values) {
        if (v == 0.0) return 0.0;
        s += std::log(v);
      }
      return std::exp(s / n);
    }
    case Aggregator::hmean: {
      double s = 0.0;
      for (double v : values) {
        if (v == 0.0) return 0.0;
        s += 1.0 / v;
      }
      return n / s;
    }
  }
  return 0.0;
}

std::vector<double> decode_scores(const Sketch& s, const CodesMatrix& codes, Aggregator agg) {
  if (s.depth() != codes.depth() || s.width() != codes.width()) {
    fail(ErrorKind::shape, "decode: sketch " + std::to_string(s.depth()) + "x" + std::to_string(s.width()) +
                               " does not match codes " + std::to_string(codes.depth()) + "x" +
                               std::to_string(codes.width()));
  }
  std::vector<double> scores(codes.size());
  std::vector<double> gathered(codes.depth());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    auto r = codes.row(i);
    for (int d = 0; d < codes.depth(); ++d) gathered[d] = s.at(d, r[d]);
    scores[i] = reduce_estimates(gathered, agg);
  }
  return scores;
}

OneHotMatrix::OneHotMatrix(const CodesMatrix& codes)
    : depth_(codes.depth()), width_(codes.width()), rows_(codes.size()), data_(rows_ * cols(), 0.0) {
  for (std::size_t i = 0; i < rows_; ++i) {
    auto r = codes.row(i);
    for (int d = 0; d < depth_; ++d) data_[i * cols() + static_cast<std::size_t>(d) * width_ + r[d]] = 1.0;
  }
}

std::vector<double> batch_decode(const Sketch& s, const OneHotMatrix& b) {
  if (s.depth() != b.depth() || s.width() != b.width()) fail(ErrorKind::shape, "batch_decode: shape mismatch");
  std::vector<double> out(b.rows() * static_cast<std::size_t>(b.depth()), 0.0);
  for (std::size_t i = 0; i < b.rows(); ++i) {
    auto brow = b.row(i);
    for (int d = 0; d < b.depth(); ++d) {
      double acc = 0.0;
      const std::size_t base = static_cast<std::size_t>(d) * b.width();
      for (int c = 0; c < b.width(); ++c) acc += brow[base + c] * s.values()[base + c];
      out[i * b.depth() + d] = acc;
    }
  }
  return out;
}

void write_sketch(const Sketch& s, std::ostream& out) {
  out << kSketchMagic << ' ' << kSketchVersion << ' ' << s.depth() << ' ' << s.width() << '\n';
  for (int d = 0; d < s.depth(); ++d) {
    auto slice = s.slice(d);
    for (std::size_t c = 0; c < slice.size(); ++c) out << (c ? " " : "") << format_double(slice[c]);
    out << '\n';
  }
}

Sketch read_sketch(std::istream& in) {
  std::string magic;
  int version = 0, depth = 0, width = 0;
  if (!(in >> magic >> version >> depth >> width) || magic != kSketchMagic) {
    fail(ErrorKind::format, "not an emde sketch");
  }
  if (version != kSketchVersion) fail(ErrorKind::format, "unsupported sketch format version");
  require_shape(depth, width);
  std::vector<double> values(static_cast<std::size_t>(depth) * width);
  std::string tok;
  for (double& v : values) {
    if (!(in >> tok)) fail(ErrorKind::format, "sketch: truncated values");
    v = parse_double(tok);
  }
  return Sketch(depth, width, std::move(values));
}

void save_sketch(const Sketch& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write '" + path + "'");
  write_sketch(s, out);
}

Sketch load_sketch(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
  return read_sketch(in);
}

}  // namespace emde
