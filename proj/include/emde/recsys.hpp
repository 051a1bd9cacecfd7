#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "emde/model.hpp"
#include "emde/partitioner.hpp"
#include "emde/sketch.hpp"

namespace emde {

struct Interaction {
  std::string session_id;
  std::string item_id;
  double timestamp = 0.0;
  std::string event_type;
  double weight = 1.0;
};

struct InteractionLog {
  std::vector<Interaction> records;
};

/// CSV `session_id,item_id,timestamp,event_type,weight`; a header row is
/// optional and the weight column may be omitted (default 1).
InteractionLog load_interactions(const std::string& path);
void save_interactions(const InteractionLog& log, const std::string& path);

/// One session (or one user history for top-k), ordered by time.
struct Session {
  std::string id;
  std::vector<std::string> items;
  std::vector<double> weights;
  std::vector<std::string> events;

  std::size_t size() const { return items.size(); }
};

/// Groups by session_id in order of first appearance; events inside a session
/// are stably sorted by timestamp.
std::vector<Session> group_sessions(const InteractionLog& log);

/// Removes events whose item is absent from `known`. Returns the number of
/// dropped events.
std::size_t drop_unknown_items(std::vector<Session>& sessions, const std::function<bool(const std::string&)>& known);

/// Codes for one input modality, in the model's channel order.
struct ModalityCodes {
  std::string name;
  CodesMatrix codes;

  std::size_t sketch_size() const { return static_cast<std::size_t>(codes.depth()) * codes.width(); }
};

struct Example {
  std::vector<double> input;
  Sketch target;
  std::string session_id;
  std::size_t position = 0;                // number of input events
  std::vector<std::string> input_items;    // for seen-item exclusion
  std::vector<std::string> target_items;   // held-out items
};

/// Input length for session examples: two sketches (last item, history) per modality.
std::size_t session_input_size(std::span<const ModalityCodes> modalities);
/// Input length for top-k examples: liked and disliked sketches per modality.
std::size_t topk_input_size(std::span<const ModalityCodes> modalities);

/// Example predicting session.items[split] from the first `split` events.
/// Per modality the input holds the last input item's sketch followed by the
/// decayed sum of the earlier ones (dt counted in event steps before the last
/// input item); both are L2-normalized width-wise. Returns nullopt when
/// split < 1 or split >= session size.
std::optional<Example> build_session_example(const Session& session, std::size_t split,
                                              std::span<const ModalityCodes> modalities,
                                              std::size_t target_modality, double alpha, double w);

/// Decayed aggregate of the first `split` events in one modality, last input
/// item included at dt = 0. Used as the pure-EMDE query.
Sketch session_history_sketch(const Session& session, std::size_t split, const CodesMatrix& codes, double alpha,
                              double w);

/// Number of liked items placed in the input: ceil(ratio * n), capped at n - 1.
std::size_t topk_input_count(std::size_t n, double split_ratio);

/// Seeded shuffle of liked items split into input and held-out parts. Each
/// modality contributes a liked-input sketch and a disliked sketch, both
/// L2-normalized. The target is the unit-weight sum of held-out items.
std::optional<Example> build_topk_example(const std::string& user_id, const std::vector<std::string>& liked,
                                          const std::vector<std::string>& disliked,
                                          std::span<const ModalityCodes> modalities, std::size_t target_modality,
                                          double split_ratio, std::uint64_t seed);

struct Scored {
  std::string item_id;
  double score;
};

/// Top-k by descending score, ties broken by ascending item_id. Excluded items
/// are removed before ranking.
std::vector<Scored> rank_items(const CodesMatrix& catalog, std::span<const double> scores, std::size_t k,
                               const std::unordered_set<std::string>& exclude = {});

/// Softmax across width on every depth slice, computed in the log domain.
Sketch softmax_sketch(std::span<const double> logits, int depth, int width);

/// Eval-mode forward, width-wise softmax per depth slice, decode over the
/// catalog, then rank_items.
std::vector<Scored> recommend(const ModelParams& model, std::span<const double> input, const CodesMatrix& catalog,
                              std::size_t k, Aggregator agg = Aggregator::gmean,
                              const std::unordered_set<std::string>& exclude = {});

/// Pure EMDE: L1-normalize the query sketch and decode it directly.
std::vector<Scored> recommend_pure(const Sketch& query, const CodesMatrix& catalog, std::size_t k,
                                   Aggregator agg = Aggregator::gmean,
                                   const std::unordered_set<std::string>& exclude = {});

/// Item counts, most popular first, ties by item_id.
std::vector<Scored> popularity_baseline(const InteractionLog& log);
std::vector<Scored> popularity_baseline(std::span<const Session> sessions);

struct SessionMetrics {
  double mrr = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double hit_rate = 0.0;
  double map = 0.0;
  std::size_t count = 0;
};

/// Next-item metrics. MRR and HR look at the immediate next item; precision,
/// recall and MAP at the set of all remaining items of the session.
class SessionEvaluator {
 public:
  explicit SessionEvaluator(std::size_t k = 20) : k_(k) {}
  void add(std::span<const std::string> ranking, const std::string& next_item,
           std::span<const std::string> remainder);
  SessionMetrics result() const;

 private:
  std::size_t k_;
  SessionMetrics sum_;
};

struct TopkMetrics {
  std::map<int, double> recall;
  std::map<int, double> ndcg;
  std::size_t count = 0;
};

/// Recall@K = hits in the first K / |held-out|. NDCG@K uses binary relevance
/// with the ideal DCG over min(K, |held-out|) slots.
class TopkEvaluator {
 public:
  explicit TopkEvaluator(std::vector<int> cutoffs = {1, 5, 10, 20});
  void add(std::span<const std::string> ranking, std::span<const std::string> held_out);
  TopkMetrics result() const;
  const std::vector<int>& cutoffs() const { return cutoffs_; }

 private:
  std::vector<int> cutoffs_;
  TopkMetrics sum_;
};

}  // namespace emde
