#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emde/config.hpp"
#include "emde/embeddings.hpp"
#include "emde/model.hpp"
#include "emde/recsys.hpp"

namespace emde {

/// Interactions split into train/test sessions plus codes for every modality.
struct Dataset {
  Task task = Task::session;
  std::vector<Session> train;
  std::vector<Session> test;
  std::vector<ModalityCodes> modalities;
  std::vector<std::optional<Partitioning>> partitionings;  // set for dlsh modalities
  std::size_t target = 0;
  CodesMatrix catalog;               // target-modality codes of items seen in the log
  std::vector<Scored> popularity;    // from training sessions
  std::size_t dropped_events = 0;    // items missing from an embedding table
};

/// Builds codes for all modalities and splits the log. `tables` supplies
/// embeddings for dlsh modalities by name; missing ones are loaded from the
/// configured path.
Dataset prepare_dataset(const ExperimentConfig& cfg, const InteractionLog& log,
                        std::map<std::string, EmbeddingTable> tables = {});

struct TrainingSet {
  Matrix inputs;
  Matrix targets;
  std::vector<InputChannel> channels;
};

TrainingSet build_training_set(const Dataset& data, const ExperimentConfig& cfg);
ModelSpec model_spec_for(const Dataset& data, const ExperimentConfig& cfg);

/// Fresh or resumed training on the dataset's training split.
TrainState train_model(const Dataset& data, const ExperimentConfig& cfg, std::optional<TrainState> resume = {},
                       int max_epochs = 0);

struct EvalReport {
  std::optional<SessionMetrics> session;  // session task only
  TopkMetrics topk;
};

struct Prediction {
  std::string session_id;
  std::vector<Scored> ranking;
};

/// Scores every test prediction point. Session task: one point per position
/// with at least one preceding event; Recall/NDCG there use the next item as
/// the held-out set. `model` is required for conditional mode.
EvalReport evaluate_dataset(const Dataset& data, const ExperimentConfig& cfg, EvalMode mode,
                            const ModelParams* model, std::vector<Prediction>* predictions = nullptr);

/// Metric rows `metric,k,value`.
void write_metrics_csv(const EvalReport& report, const ExperimentConfig& cfg, const std::string& path);
std::string format_metrics_table(const EvalReport& report, const ExperimentConfig& cfg);
void write_predictions_csv(const std::vector<Prediction>& predictions, const std::string& path);

// Command implementations shared by the C API and the CLI. Each writes its
// artifacts under cfg.output_dir and returns a short human-readable summary.
std::string run_fit_partitions(const ExperimentConfig& cfg);
std::string run_encode(const ExperimentConfig& cfg, const std::string& modality, const std::vector<std::string>& items,
                       const std::vector<double>& weights, const std::string& out_path);
std::string run_train(const ExperimentConfig& cfg, const std::string& resume_path, int max_epochs);
std::string run_evaluate(const ExperimentConfig& cfg, const std::string& checkpoint_path);
std::string run_density_sweep(const ExperimentConfig& cfg);
std::string run_ablate(const ExperimentConfig& cfg);

/// Writes the bundled toy dataset: clustered item embeddings plus a session log
/// and a top-k (like/dislike) log.
std::string write_toy_dataset(const std::string& dir, std::uint64_t seed);

}  // namespace emde
