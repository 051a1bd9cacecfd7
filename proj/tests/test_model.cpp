#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "emde/common.hpp"
#include "emde/model.hpp"
#include "emde/recsys.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace emde;

namespace {

ModelSpec tiny_spec(bool bn = true, bool residual = true, int hidden = 2) {
  ModelSpec s;
  s.input_size = 16;
  s.output_depth = 2;
  s.output_width = 4;
  s.hidden_layers = hidden;
  s.hidden_width = 8;
  s.batch_norm = bn;
  s.residual = residual;
  return s;
}

// Scalar reference: loops and std::exp/std::log only.
double reference_kl(const std::vector<double>& logits, const std::vector<double>& target, int depth, int width) {
  double total = 0;
  int active = 0;
  for (int d = 0; d < depth; ++d) {
    double mass = 0;
    for (int c = 0; c < width; ++c) mass += target[d * width + c];
    if (mass == 0) continue;
    double mx = -INFINITY;
    for (int c = 0; c < width; ++c) mx = std::max(mx, logits[d * width + c]);
    double z = 0;
    for (int c = 0; c < width; ++c) z += std::exp(logits[d * width + c] - mx);
    double kl = 0;
    for (int c = 0; c < width; ++c) {
      const double p = target[d * width + c] / mass;
      if (p > 0) kl += p * (std::log(p) - (logits[d * width + c] - mx - std::log(z)));
    }
    total += kl;
    ++active;
  }
  return active ? total / active : 0.0;
}

bool same_trainables(const ModelParams& a, const ModelParams& b) {
  auto ta = a.trainable();
  auto tb = b.trainable();
  for (std::size_t t = 0; t < ta.size(); ++t) {
    if (!std::equal(ta[t].begin(), ta[t].end(), tb[t].begin())) return false;
  }
  return true;
}

Matrix row_matrix(const std::vector<double>& v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = v[i];
  return m;
}

}  // namespace

TEST_CASE("zero weights give logits equal to the output bias") {
  auto p = init_model(tiny_spec(false, false), 1);
  for (auto& l : p.layers) l.weight.setZero();
  Rng rng(2);
  for (Eigen::Index i = 0; i < p.layers.back().bias.size(); ++i) p.layers.back().bias(i) = rng.normal();
  Matrix x, y;
  testing::random_batch(5, p.spec, rng, x, y);
  auto out = predict(p, x);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) CHECK(out(r, c) == p.layers.back().bias(c));
  }
}

TEST_CASE("eval forward is deterministic and leaves params alone") {
  auto p = init_model(tiny_spec(), 3);
  Rng rng(4);
  Matrix x, y;
  testing::random_batch(7, p.spec, rng, x, y);
  forward(p, x, Mode::train);  // make running stats non-trivial
  const auto before = p.layers[0].running_mean;
  auto a = predict(p, x);
  auto b = forward(p, x, Mode::eval);
  CHECK(a == b);
  CHECK(p.layers[0].running_mean == before);
  auto one = forward_one(p, std::span<const double>(x.data(), static_cast<std::size_t>(x.cols())));
  for (std::size_t c = 0; c < one.size(); ++c) CHECK(one[c] == doctest::Approx(a(0, static_cast<Eigen::Index>(c))).epsilon(1e-12));
  Matrix wrong(1, 3);
  wrong.setZero();
  CHECK_THROWS_AS(predict(p, wrong), Error);
}

TEST_CASE("a zeroed residual block is the identity") {
  // Net A: projection, residual block, output. Zeroing the block's weights
  // and bias turns it into h + leaky(0) = h, so A must equal net B that
  // skips the block.
  auto a = init_model(tiny_spec(false, true, 2), 5);
  REQUIRE(a.layers[1].residual);
  a.layers[1].weight.setZero();
  a.layers[1].bias.setZero();
  auto b = init_model(tiny_spec(false, true, 1), 5);
  b.layers[0] = a.layers[0];
  b.layers[1] = a.layers[2];
  Rng rng(6);
  Matrix x, y;
  testing::random_batch(4, a.spec, rng, x, y);
  auto ya = predict(a, x);
  auto yb = predict(b, x);
  CHECK((ya - yb).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("kl loss closed forms") {
  const std::vector<double> logits{0, 0};
  const std::vector<double> target{1, 0};
  CHECK(kl_sketch_loss(logits, target, 1, 2) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  // logits = log p (up to a constant) gives zero loss.
  const std::vector<double> p{0.1, 0.2, 0.3, 0.4};
  std::vector<double> lp;
  for (double v : p) lp.push_back(std::log(v) + 3.0);
  CHECK(std::abs(kl_sketch_loss(lp, p, 1, 4)) < 1e-15);

  // Slices with no target mass do not count.
  const std::vector<double> two_logits{0, 0, 5, -5};
  const std::vector<double> half_empty{1, 0, 0, 0};
  CHECK(kl_sketch_loss(two_logits, half_empty, 2, 2) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const std::vector<double> empty(4, 0.0);
  CHECK(kl_sketch_loss(two_logits, empty, 2, 2) == 0.0);
}

TEST_CASE("kl loss matches the scalar reference and is scale invariant") {
  Rng rng(9);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> logits(12), target(12);
    for (auto& v : logits) v = rng.normal() * 3;
    for (auto& v : target) v = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
    const double loss = kl_sketch_loss(logits, target, 3, 4);
    CHECK(loss == doctest::Approx(reference_kl(logits, target, 3, 4)).epsilon(1e-10));
    CHECK(loss >= 0.0);
    std::vector<double> scaled = target;
    const double k = 0.01 + rng.uniform() * 100;
    for (auto& v : scaled) v *= k;
    CHECK(std::abs(kl_sketch_loss(logits, scaled, 3, 4) - loss) <= 1e-12 * std::max(1.0, loss));
  }
}

TEST_CASE("softmax slices sum to one") {
  Rng rng(10);
  std::vector<double> logits(5 * 7);
  for (auto& v : logits) v = rng.normal() * 50;
  auto s = softmax_sketch(logits, 5, 7);
  for (int d = 0; d < 5; ++d) {
    double total = 0;
    for (double v : s.slice(d)) total += v;
    CHECK(std::abs(total - 1.0) < 1e-9);
  }
}

TEST_CASE("batch loss gradient matches finite differences on the logits") {
  Rng rng(11);
  Matrix logits(3, 8), targets(3, 8), grad;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    logits.data()[i] = rng.normal();
    targets.data()[i] = rng.uniform() < 0.4 ? 0.0 : rng.uniform();
  }
  kl_sketch_loss_grad(logits, targets, 2, 4, grad);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    Matrix up = logits, down = logits, g;
    up.data()[i] += h;
    down.data()[i] -= h;
    const double fd = (kl_sketch_loss_grad(up, targets, 2, 4, g) - kl_sketch_loss_grad(down, targets, 2, 4, g)) / (2 * h);
    CHECK(grad.data()[i] == doctest::Approx(fd).epsilon(1e-6).scale(1e-6));
  }
}

TEST_CASE("parameter gradients match finite differences for each layer kind") {
  struct Case {
    bool bn, residual;
    int hidden;
  };
  for (Case c : {Case{false, false, 0}, Case{false, false, 1}, Case{true, false, 1}, Case{false, true, 2},
                 Case{true, true, 2}, Case{true, true, 3}}) {
    CAPTURE(c.bn);
    CAPTURE(c.residual);
    CAPTURE(c.hidden);
    auto spec = tiny_spec(c.bn, c.residual, c.hidden);
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      auto p = init_model(spec, seed);
      Rng rng(seed + 50);
      Matrix x, y;
      testing::random_batch(6, spec, rng, x, y);
      auto r = testing::finite_difference_check(p, x, y, Mode::train);
      CHECK(r.max_rel_err < 1e-4);
    }
  }
}

TEST_CASE("learning rate zero leaves parameters bit exact") {
  auto p = init_model(tiny_spec(), 12);
  auto before = p;
  Rng rng(13);
  Matrix x, y;
  testing::random_batch(8, p.spec, rng, x, y);
  TrainConfig cfg;
  AdamState st;
  backward_and_step(p, x, y, cfg, 0.0, st);
  CHECK(same_trainables(p, before));
  CHECK(st.step == 1);
}

TEST_CASE("a single pair is memorized") {
  auto spec = tiny_spec();
  auto p = init_model(spec, 14);
  Rng rng(15);
  Matrix x, y;
  testing::random_batch(1, spec, rng, x, y);
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  AdamState st;
  double loss = 0;
  for (int i = 0; i < 500; ++i) loss = backward_and_step(p, x, y, cfg, cfg.learning_rate, st);
  CHECK(loss < 1e-3);
}

TEST_CASE("non-finite loss aborts the step") {
  auto p = init_model(tiny_spec(false, false), 16);
  auto before = p;
  Rng rng(17);
  Matrix x, y;
  testing::random_batch(2, p.spec, rng, x, y);
  x(0, 0) = std::nan("");
  TrainConfig cfg;
  AdamState st;
  try {
    backward_and_step(p, x, y, cfg, 0.01, st);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::numeric);
  }
  CHECK(same_trainables(p, before));
}

TEST_CASE("learning rate schedule") {
  TrainConfig cfg;
  cfg.learning_rate = 0.004;
  cfg.gamma = 0.5;
  CHECK(cfg.lr_for_epoch(1) == 0.004);
  CHECK(cfg.lr_for_epoch(3) == doctest::Approx(0.001).epsilon(1e-15));
  TrainConfig bad;
  bad.gamma = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = TrainConfig{};
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = TrainConfig{};
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("one optimizer step per batch") {
  auto spec = tiny_spec();
  Rng rng(18);
  Matrix x, y;
  testing::random_batch(10, spec, rng, x, y);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 16;
  auto st = start_training(spec, 1);
  train(st, x, y, cfg);
  CHECK(st.adam.step == 1);
  CHECK(st.history.size() == 1);
  cfg.batch_size = 4;
  auto st2 = start_training(spec, 1);
  train(st2, x, y, cfg);
  CHECK(st2.adam.step == 3);
}

TEST_CASE("loss decreases on a learnable mapping") {
  // Target: the input's first block shifted by one bucket.
  ModelSpec spec;
  spec.input_size = 16;
  spec.output_depth = 2;
  spec.output_width = 8;
  spec.hidden_width = 32;
  std::vector<int> improved;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    Matrix x = Matrix::Zero(400, 16), y = Matrix::Zero(400, 16);
    for (int r = 0; r < 400; ++r) {
      for (int d = 0; d < 2; ++d) {
        const int c = static_cast<int>(rng.below(8));
        x(r, d * 8 + c) = 1;
        y(r, d * 8 + (c + 1) % 8) = 1;
      }
    }
    TrainConfig cfg;
    cfg.epochs = 6;
    cfg.batch_size = 32;
    cfg.learning_rate = 0.01;
    cfg.gamma = 0.8;
    cfg.seed = seed;
    auto st = start_training(spec, seed);
    train(st, x, y, cfg);
    improved.push_back(st.history.back().loss < 0.5 * st.history.front().loss);
  }
  std::sort(improved.begin(), improved.end());
  CHECK(improved[2] == 1);
}

TEST_CASE("checkpoint round trip and exact resume") {
  testing::TempDir dir("ckpt");
  auto spec = tiny_spec();
  Rng rng(19);
  Matrix x, y;
  testing::random_batch(50, spec, rng, x, y);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 8;
  cfg.seed = 3;

  auto full = start_training(spec, 7, {{"a", 10}, {"b", 6}});
  train(full, x, y, cfg);

  auto part = start_training(spec, 7, {{"a", 10}, {"b", 6}});
  train(part, x, y, cfg, 2);
  CHECK(part.epochs_done == 2);
  save_checkpoint(part, dir.file("m.ckpt"));
  auto resumed = load_checkpoint(dir.file("m.ckpt"));
  CHECK(resumed.params.channels == part.params.channels);
  train(resumed, x, y, cfg);
  CHECK(resumed.epochs_done == 4);
  CHECK(same_trainables(resumed.params, full.params));
  CHECK(predict(resumed.params, x) == predict(full.params, x));
  REQUIRE(resumed.history.size() == full.history.size());
  for (std::size_t i = 0; i < full.history.size(); ++i) CHECK(resumed.history[i].loss == full.history[i].loss);

  std::ostringstream a, b;
  write_checkpoint(full, a);
  write_checkpoint(resumed, b);
  CHECK(a.str() == b.str());

  testing::write_file(dir.file("loss.csv"), "");
  write_loss_csv(full.history, dir.file("loss.csv"));
  const auto csv = testing::read_file(dir.file("loss.csv"));
  CHECK(csv.rfind("epoch,loss,lr\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("checkpoints with a foreign header are rejected") {
  std::istringstream in("emde-model 2\n");
  CHECK_THROWS_AS(read_checkpoint(in), Error);
  std::istringstream junk("hello\n");
  CHECK_THROWS_AS(read_checkpoint(junk), Error);
}
