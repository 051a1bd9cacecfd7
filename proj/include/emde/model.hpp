#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "emde/sketch.hpp"

namespace emde {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct ModelSpec {
  std::size_t input_size = 0;
  int output_depth = 0;
  int output_width = 0;
  /// Hidden layers; the first projects the input, the rest are residual
  /// blocks when `residual` is set.
  int hidden_layers = 3;
  std::size_t hidden_width = 256;
  bool residual = true;
  bool batch_norm = true;
  double leaky_slope = 0.01;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  std::size_t output_size() const { return static_cast<std::size_t>(output_depth) * output_width; }
};

/// Named slice of the input vector; checked against the example builder at
/// evaluation time so a checkpoint can't silently be fed a different layout.
struct InputChannel {
  std::string name;
  std::size_t size = 0;

  friend bool operator==(const InputChannel&, const InputChannel&) = default;
};

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;
  bool batch_norm = false;
  Vector bn_scale;
  Vector bn_shift;
  Vector running_mean;
  Vector running_var;
  bool activation = true;
  bool residual = false;

  std::size_t in() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out() const { return static_cast<std::size_t>(weight.rows()); }
};

struct ModelParams {
  ModelSpec spec;
  std::vector<InputChannel> channels;
  std::vector<DenseLayer> layers;

  /// Trainable tensors in a fixed order: per layer weight, bias, and when
  /// batch-normalized scale and shift.
  std::vector<std::span<double>> trainable();
  std::vector<std::span<const double>> trainable() const;
  std::size_t trainable_count() const;
};

enum class Mode { train, eval };

ModelParams init_model(const ModelSpec& spec, std::uint64_t seed, std::vector<InputChannel> channels = {});

/// Batch forward: rows of `inputs` are examples. Returns logits, one row per
/// example. Train mode normalizes with batch statistics and updates the
/// running statistics in `params`.
Matrix forward(ModelParams& params, const Matrix& inputs, Mode mode);
/// Eval-mode forward; never touches params.
Matrix predict(const ModelParams& params, const Matrix& inputs);
std::vector<double> forward_one(const ModelParams& params, std::span<const double> input);

/// Depth-averaged width-wise KL(p || softmax(logits)), p the L1-normalized
/// target slice. Slices with zero target mass are left out of the mean; a
/// target with no mass at all gives 0.
double kl_sketch_loss(std::span<const double> logits, std::span<const double> target, int depth, int width);

/// Mean batch loss and its gradient with respect to the logits.
double kl_sketch_loss_grad(const Matrix& logits, const Matrix& targets, int depth, int width, Matrix& grad);

/// Loss plus gradients of every trainable tensor (same layout as trainable()).
struct LossAndGrad {
  double loss = 0.0;
  std::vector<std::vector<double>> grads;
};
LossAndGrad loss_and_gradients(ModelParams& params, const Matrix& inputs, const Matrix& targets, Mode mode);

struct TrainConfig {
  int epochs = 5;
  std::size_t batch_size = 256;
  double learning_rate = 0.004;
  double gamma = 0.5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
  /// Learning rate in effect during 1-based epoch `epoch`.
  double lr_for_epoch(int epoch) const;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

/// One Adam update on a batch. Throws numeric (parameters untouched) when the
/// loss is not finite.
double backward_and_step(ModelParams& params, const Matrix& inputs, const Matrix& targets,
                         const TrainConfig& config, double learning_rate, AdamState& state);

struct EpochRecord {
  int epoch;
  double loss;
  double lr;
};

/// Everything needed to continue training exactly where it stopped.
struct TrainState {
  ModelParams params;
  AdamState adam;
  int epochs_done = 0;
  std::vector<EpochRecord> history;
};

/// Trains until config.epochs (or `max_epochs` more, if positive). Each epoch
/// is shuffled with a seed derived from (config.seed, epoch), so a resumed run
/// replays the same batches as an uninterrupted one.
void train(TrainState& state, const Matrix& inputs, const Matrix& targets, const TrainConfig& config,
           int max_epochs = 0, const std::function<void(const EpochRecord&)>& on_epoch = {});

TrainState start_training(const ModelSpec& spec, std::uint64_t seed, std::vector<InputChannel> channels = {});

void save_checkpoint(const TrainState& state, const std::string& path);
TrainState load_checkpoint(const std::string& path);
void write_checkpoint(const TrainState& state, std::ostream& out);
TrainState read_checkpoint(std::istream& in);

void write_loss_csv(const std::vector<EpochRecord>& history, const std::string& path);

}  // namespace emde
