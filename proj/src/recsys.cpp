#include "emde/recsys.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "emde/common.hpp"

namespace emde {

InteractionLog load_interactions(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open interaction log '" + path + "'");
  InteractionLog log;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (lineno == 1 && t.rfind("session_id", 0) == 0) continue;
    auto f = split(t, ',');
    const std::string where = path + ":" + std::to_string(lineno) + ": ";
    if (f.size() < 4 || f.size() > 5) fail(ErrorKind::format, where + "expected 4 or 5 comma-separated fields");
    Interaction r;
    r.session_id = f[0];
    r.item_id = f[1];
    r.event_type = f[3];
    try {
      r.timestamp = parse_double(f[2]);
      if (f.size() == 5 && !f[4].empty()) r.weight = parse_double(f[4]);
    } catch (const Error& e) {
      fail(ErrorKind::format, where + e.what());
    }
    if (r.session_id.empty() || r.item_id.empty()) fail(ErrorKind::format, where + "empty session or item id");
    if (!(r.weight >= 0.0) || !std::isfinite(r.weight)) fail(ErrorKind::format, where + "weight must be >= 0");
    log.records.push_back(std::move(r));
  }
  return log;
}

void save_interactions(const InteractionLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write '" + path + "'");
  out << "session_id,item_id,timestamp,event_type,weight\n";
  for (const auto& r : log.records) {
    out << r.session_id << ',' << r.item_id << ',' << format_double(r.timestamp) << ',' << r.event_type << ','
        << format_double(r.weight) << '\n';
  }
}

std::vector<Session> group_sessions(const InteractionLog& log) {
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::vector<const Interaction*>> groups;
  std::vector<std::string> ids;
  for (const auto& r : log.records) {
    auto [it, inserted] = index.emplace(r.session_id, groups.size());
    if (inserted) {
      groups.emplace_back();
      ids.push_back(r.session_id);
    }
    groups[it->second].push_back(&r);
  }
  std::vector<Session> sessions(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto& events = groups[g];
    std::stable_sort(events.begin(), events.end(),
                     [](const Interaction* a, const Interaction* b) { return a->timestamp < b->timestamp; });
    Session& s = sessions[g];
    s.id = ids[g];
    for (const Interaction* e : events) {
      s.items.push_back(e->item_id);
      s.weights.push_back(e->weight);
      s.events.push_back(e->event_type);
    }
  }
  return sessions;
}

std::size_t drop_unknown_items(std::vector<Session>& sessions, const std::function<bool(const std::string&)>& known) {
  std::size_t dropped = 0;
  for (auto& s : sessions) {
    Session kept;
    kept.id = s.id;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!known(s.items[i])) {
        ++dropped;
        continue;
      }
      kept.items.push_back(s.items[i]);
      kept.weights.push_back(s.weights[i]);
      kept.events.push_back(s.events[i]);
    }
    s = std::move(kept);
  }
  return dropped;
}

std::size_t session_input_size(std::span<const ModalityCodes> modalities) {
  std::size_t n = 0;
  for (const auto& m : modalities) n += 2 * m.sketch_size();
  return n;
}

std::size_t topk_input_size(std::span<const ModalityCodes> modalities) { return session_input_size(modalities); }

namespace {

void append(std::vector<double>& out, const Sketch& s) { out.insert(out.end(), s.values().begin(), s.values().end()); }

Sketch sum_items(const CodesMatrix& codes, std::span<const std::string> items) {
  Sketch s(codes.depth(), codes.width());
  for (const auto& id : items) accumulate_row(s, codes, codes.index_of(id), 1.0);
  return s;
}

}  // namespace

Sketch session_history_sketch(const Session& session, std::size_t split, const CodesMatrix& codes, double alpha,
                              double w) {
  if (split < 1 || split > session.size()) fail(ErrorKind::invalid_argument, "history split out of range");
  Sketch s(codes.depth(), codes.width());
  const std::size_t last = split - 1;
  for (std::size_t j = 0; j < split; ++j) {
    const double weight = session.weights[j] * decay_factor(alpha, w, static_cast<double>(last - j));
    accumulate_row(s, codes, codes.index_of(session.items[j]), weight);
  }
  return s;
}

std::optional<Example> build_session_example(const Session& session, std::size_t split,
                                              std::span<const ModalityCodes> modalities,
                                              std::size_t target_modality, double alpha, double w) {
  if (split < 1 || split >= session.size()) return std::nullopt;
  if (target_modality >= modalities.size()) fail(ErrorKind::invalid_argument, "target modality out of range");
  Example ex;
  ex.session_id = session.id;
  ex.position = split;
  ex.input.reserve(session_input_size(modalities));
  const std::size_t last = split - 1;
  for (const auto& m : modalities) {
    Sketch recent(m.codes.depth(), m.codes.width());
    accumulate_row(recent, m.codes, m.codes.index_of(session.items[last]), session.weights[last]);
    Sketch history(m.codes.depth(), m.codes.width());
    for (std::size_t j = 0; j < last; ++j) {
      const double weight = session.weights[j] * decay_factor(alpha, w, static_cast<double>(last - j));
      accumulate_row(history, m.codes, m.codes.index_of(session.items[j]), weight);
    }
    normalize_in_place(recent, Norm::l2);
    normalize_in_place(history, Norm::l2);
    append(ex.input, recent);
    append(ex.input, history);
  }
  ex.target = encode_item(modalities[target_modality].codes, session.items[split]);
  ex.input_items.assign(session.items.begin(), session.items.begin() + static_cast<std::ptrdiff_t>(split));
  ex.target_items.assign(session.items.begin() + static_cast<std::ptrdiff_t>(split), session.items.end());
  return ex;
}

std::size_t topk_input_count(std::size_t n, double split_ratio) {
  if (n < 2) return 0;
  auto k = static_cast<std::size_t>(std::ceil(split_ratio * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(k, 1, n - 1);
}

std::optional<Example> build_topk_example(const std::string& user_id, const std::vector<std::string>& liked,
                                          const std::vector<std::string>& disliked,
                                          std::span<const ModalityCodes> modalities, std::size_t target_modality,
                                          double split_ratio, std::uint64_t seed) {
  if (liked.size() < 2) return std::nullopt;
  if (target_modality >= modalities.size()) fail(ErrorKind::invalid_argument, "target modality out of range");
  std::vector<std::string> order = liked;
  Rng rng(derive_seed(seed, hash_string(user_id)));
  rng.shuffle(order);
  const std::size_t n_in = topk_input_count(order.size(), split_ratio);
  std::span<const std::string> in_items(order.data(), n_in);
  std::span<const std::string> out_items(order.data() + n_in, order.size() - n_in);

  Example ex;
  ex.session_id = user_id;
  ex.position = n_in;
  for (const auto& m : modalities) {
    Sketch like = sum_items(m.codes, in_items);
    Sketch dislike = sum_items(m.codes, disliked);
    normalize_in_place(like, Norm::l2);
    normalize_in_place(dislike, Norm::l2);
    append(ex.input, like);
    append(ex.input, dislike);
  }
  ex.target = sum_items(modalities[target_modality].codes, out_items);
  ex.input_items.assign(in_items.begin(), in_items.end());
  ex.target_items.assign(out_items.begin(), out_items.end());
  return ex;
}

std::vector<Scored> rank_items(const CodesMatrix& catalog, std::span<const double> scores, std::size_t k,
                               const std::unordered_set<std::string>& exclude) {
  if (scores.size() != catalog.size()) fail(ErrorKind::shape, "one score per catalog item required");
  std::vector<std::size_t> idx;
  idx.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!exclude.count(catalog.id(i))) idx.push_back(i);
  }
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return catalog.id(a) < catalog.id(b);
  };
  const std::size_t take = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(), better);
  std::vector<Scored> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back({catalog.id(idx[i]), scores[idx[i]]});
  return out;
}

Sketch softmax_sketch(std::span<const double> logits, int depth, int width) {
  Sketch s(depth, width, std::vector<double>(logits.begin(), logits.end()));
  for (int d = 0; d < depth; ++d) {
    auto slice = s.slice(d);
    const double mx = *std::max_element(slice.begin(), slice.end());
    double sum = 0.0;
    for (double& x : slice) {
      x = std::exp(x - mx);
      sum += x;
    }
    for (double& x : slice) x /= sum;
  }
  return s;
}

std::vector<Scored> recommend(const ModelParams& model, std::span<const double> input, const CodesMatrix& catalog,
                              std::size_t k, Aggregator agg, const std::unordered_set<std::string>& exclude) {
  if (catalog.depth() != model.spec.output_depth || catalog.width() != model.spec.output_width) {
    fail(ErrorKind::shape, "catalog codes do not match the model output sketch");
  }
  auto logits = forward_one(model, input);
  Sketch out = softmax_sketch(logits, model.spec.output_depth, model.spec.output_width);
  return rank_items(catalog, decode_scores(out, catalog, agg), k, exclude);
}

std::vector<Scored> recommend_pure(const Sketch& query, const CodesMatrix& catalog, std::size_t k, Aggregator agg,
                                   const std::unordered_set<std::string>& exclude) {
  Sketch q = normalize(query, Norm::l1);
  return rank_items(catalog, decode_scores(q, catalog, agg), k, exclude);
}

namespace {

std::vector<Scored> rank_counts(const std::unordered_map<std::string, double>& counts) {
  std::vector<Scored> out;
  out.reserve(counts.size());
  for (const auto& [id, c] : counts) out.push_back({id, c});
  std::sort(out.begin(), out.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item_id < b.item_id;
  });
  return out;
}

}  // namespace

std::vector<Scored> popularity_baseline(const InteractionLog& log) {
  if (log.records.empty()) fail(ErrorKind::invalid_argument, "empty interaction log");
  std::unordered_map<std::string, double> counts;
  for (const auto& r : log.records) counts[r.item_id] += 1.0;
  return rank_counts(counts);
}

std::vector<Scored> popularity_baseline(std::span<const Session> sessions) {
  std::unordered_map<std::string, double> counts;
  for (const auto& s : sessions) {
    for (const auto& item : s.items) counts[item] += 1.0;
  }
  if (counts.empty()) fail(ErrorKind::invalid_argument, "no interactions");
  return rank_counts(counts);
}

void SessionEvaluator::add(std::span<const std::string> ranking, const std::string& next_item,
                           std::span<const std::string> remainder) {
  const std::size_t n = std::min(k_, ranking.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (ranking[i] == next_item) {
      sum_.mrr += 1.0 / static_cast<double>(i + 1);
      sum_.hit_rate += 1.0;
      break;
    }
  }
  std::unordered_set<std::string> hidden(remainder.begin(), remainder.end());
  if (!hidden.empty()) {
    std::size_t hits = 0;
    double ap = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (hidden.count(ranking[i])) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(i + 1);
      }
    }
    sum_.precision += static_cast<double>(hits) / static_cast<double>(k_);
    sum_.recall += static_cast<double>(hits) / static_cast<double>(hidden.size());
    sum_.map += ap / static_cast<double>(hidden.size());
  }
  ++sum_.count;
}

SessionMetrics SessionEvaluator::result() const {
  if (sum_.count == 0) fail(ErrorKind::invalid_argument, "empty evaluation set");
  const double n = static_cast<double>(sum_.count);
  return {sum_.mrr / n, sum_.precision / n, sum_.recall / n, sum_.hit_rate / n, sum_.map / n, sum_.count};
}

TopkEvaluator::TopkEvaluator(std::vector<int> cutoffs) : cutoffs_(std::move(cutoffs)) {
  if (cutoffs_.empty()) fail(ErrorKind::invalid_argument, "no cutoffs");
  for (int k : cutoffs_) {
    if (k < 1) fail(ErrorKind::invalid_argument, "cutoffs must be >= 1");
    sum_.recall[k] = 0.0;
    sum_.ndcg[k] = 0.0;
  }
}

void TopkEvaluator::add(std::span<const std::string> ranking, std::span<const std::string> held_out) {
  std::unordered_set<std::string> relevant(held_out.begin(), held_out.end());
  if (relevant.empty()) fail(ErrorKind::invalid_argument, "empty held-out set");
  for (int k : cutoffs_) {
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(k), ranking.size());
    double hits = 0.0, dcg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (relevant.count(ranking[i])) {
        hits += 1.0;
        dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
      }
    }
    double idcg = 0.0;
    const std::size_t ideal = std::min<std::size_t>(static_cast<std::size_t>(k), relevant.size());
    for (std::size_t i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    sum_.recall[k] += hits / static_cast<double>(relevant.size());
    sum_.ndcg[k] += dcg / idcg;
  }
  ++sum_.count;
}

TopkMetrics TopkEvaluator::result() const {
  if (sum_.count == 0) fail(ErrorKind::invalid_argument, "empty evaluation set");
  TopkMetrics m;
  m.count = sum_.count;
  const double n = static_cast<double>(sum_.count);
  for (int k : cutoffs_) {
    m.recall[k] = sum_.recall.at(k) / n;
    m.ndcg[k] = sum_.ndcg.at(k) / n;
  }
  return m;
}

}  // namespace emde
