#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "emde/model.hpp"
#include "emde/sketch.hpp"

namespace emde {

struct ModalityConfig {
  enum class Kind { dlsh, random };

  std::string name;
  Kind kind = Kind::dlsh;
  std::string embeddings;  // dlsh only
  int depth = 10;
  int bits = 7;
  int width = 0;  // 0 selects 2^bits
  std::uint64_t seed = 1;

  int effective_width() const { return width > 0 ? width : (1 << bits); }
};

enum class Task { session, topk };
enum class EvalMode { conditional, pure, popularity, pure_pop };

EvalMode parse_eval_mode(const std::string& s);
std::string to_string(EvalMode m);

struct DensityConfig {
  std::size_t dim = 8;
  int components = 5;
  double center_scale = 1.0;  // std-dev of component centres
  std::size_t points = 10000;
  std::size_t queries = 1000;
  std::vector<int> depths{5, 10, 25, 50};
  std::vector<int> bits{7};
  int seeds = 10;
  std::size_t bandwidth_sample = 1000;
  Aggregator aggregator = Aggregator::gmean;
};

/// Declarative experiment description. Defaults follow the RETAIL column of
/// the published hyperparameter table (epochs 5, batch 256, lr 0.004,
/// gamma 0.5, N 10, alpha 0.95, K 7, w 0.01).
struct ExperimentConfig {
  std::string source;  // path the config was read from, if any
  Task task = Task::session;
  std::string interactions;
  std::string output_dir = "out";
  std::uint64_t seed = 42;
  int threads = 0;
  double test_fraction = 0.2;

  std::vector<ModalityConfig> modalities;
  std::string target_modality;  // empty: first modality

  double alpha = 0.95;
  double decay_w = 0.01;

  ModelSpec model;  // input/output sizes are filled in from the data
  TrainConfig train;

  EvalMode mode = EvalMode::conditional;
  Aggregator aggregator = Aggregator::gmean;
  int k = 20;
  std::vector<int> k_list{1, 5, 10, 20};
  int exclude_seen = -1;  // -1: task default (on for top-k, off for sessions)
  double split_ratio = 0.8;
  std::string dislike_event = "dislike";

  DensityConfig density;

  int ablate_seeds = 3;
  bool ablate_conditional = false;

  std::size_t target_index() const;
  bool exclude_seen_items() const { return exclude_seen < 0 ? task == Task::topk : exclude_seen != 0; }
  void validate() const;
};

/// `section.key=value` assignments; modality sections are `modality.<name>`,
/// so a depth override reads `modality.meta.depth=12`.
using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

/// INI-style file with [experiment], [modality.<name>], [decay], [model],
/// [train], [evaluate], [density] and [ablate] sections. Unknown keys are an
/// error. Relative paths resolve against the config file's directory.
ExperimentConfig load_config(const std::string& path, const ConfigOverrides& overrides = {});
ExperimentConfig parse_config(const std::string& text, const std::string& base_dir,
                              const ConfigOverrides& overrides = {});

}  // namespace emde
