#include "emde/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_map>

#include "emde/common.hpp"
#include "emde/density.hpp"
#include "emde/synthetic.hpp"

namespace emde {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSplitTag = 0x73706c6974;  // "split"
constexpr std::uint64_t kInitTag = 0x696e6974;     // "init"
constexpr std::size_t kPredictChunk = 512;

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.output_dir);
  return (fs::path(cfg.output_dir) / name).string();
}

std::vector<std::string> log_items(const std::vector<Session>& sessions) {
  std::set<std::string> items;
  for (const auto& s : sessions) items.insert(s.items.begin(), s.items.end());
  return {items.begin(), items.end()};
}

bool is_disliked(const ExperimentConfig& cfg, const std::string& event) { return event == cfg.dislike_event; }

void split_user(const ExperimentConfig& cfg, const Session& s, std::vector<std::string>& liked,
                std::vector<std::string>& disliked) {
  liked.clear();
  disliked.clear();
  for (std::size_t i = 0; i < s.size(); ++i) (is_disliked(cfg, s.events[i]) ? disliked : liked).push_back(s.items[i]);
}

std::vector<InputChannel> input_channels(const Dataset& data) {
  std::vector<InputChannel> out;
  const bool session = data.task == Task::session;
  for (const auto& m : data.modalities) {
    out.push_back({m.name + (session ? ".recent" : ".liked"), m.sketch_size()});
    out.push_back({m.name + (session ? ".history" : ".disliked"), m.sketch_size()});
  }
  return out;
}

void copy_row(Matrix& m, Eigen::Index r, std::span<const double> v) {
  for (std::size_t c = 0; c < v.size(); ++c) m(r, static_cast<Eigen::Index>(c)) = v[c];
}

}  // namespace

Dataset prepare_dataset(const ExperimentConfig& cfg, const InteractionLog& log,
                        std::map<std::string, EmbeddingTable> tables) {
  cfg.validate();
  Dataset data;
  data.task = cfg.task;
  std::vector<Session> sessions = group_sessions(log);

  // Embedding tables for dlsh modalities.
  for (const auto& m : cfg.modalities) {
    if (m.kind != ModalityConfig::Kind::dlsh || tables.count(m.name)) continue;
    tables.emplace(m.name, load_embeddings(m.embeddings, m.name));
  }
  data.dropped_events = drop_unknown_items(sessions, [&](const std::string& id) {
    for (const auto& m : cfg.modalities) {
      if (m.kind == ModalityConfig::Kind::dlsh && !tables.at(m.name).contains(id)) return false;
    }
    return true;
  });
  std::erase_if(sessions, [](const Session& s) { return s.size() == 0; });
  if (sessions.empty()) fail(ErrorKind::invalid_argument, "no usable interactions after filtering");

  const std::vector<std::string> items = log_items(sessions);
  for (const auto& m : cfg.modalities) {
    if (m.kind == ModalityConfig::Kind::dlsh) {
      const EmbeddingTable& table = tables.at(m.name);
      Partitioning p = fit_dlsh(table, m.depth, m.bits, m.seed, m.width);
      data.modalities.push_back({m.name, assign_codes(p, table)});
      data.partitionings.emplace_back(std::move(p));
    } else {
      data.modalities.push_back({m.name, fit_random_codes(items, m.depth, m.effective_width(), m.seed)});
      data.partitionings.emplace_back(std::nullopt);
    }
  }
  data.target = cfg.target_index();
  data.catalog = data.modalities[data.target].codes.subset(items);

  std::vector<std::size_t> order(sessions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(cfg.seed, kSplitTag));
  rng.shuffle(order);
  std::size_t n_test = static_cast<std::size_t>(cfg.test_fraction * static_cast<double>(sessions.size()) + 0.5);
  if (sessions.size() >= 2) n_test = std::clamp<std::size_t>(n_test, 1, sessions.size() - 1);
  std::vector<bool> is_test(sessions.size(), false);
  for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;
  for (std::size_t i = 0; i < sessions.size(); ++i) (is_test[i] ? data.test : data.train).push_back(sessions[i]);

  data.popularity = popularity_baseline(data.train.empty() ? data.test : data.train);
  return data;
}

ModelSpec model_spec_for(const Dataset& data, const ExperimentConfig& cfg) {
  ModelSpec spec = cfg.model;
  spec.input_size = session_input_size(data.modalities);
  spec.output_depth = data.modalities[data.target].codes.depth();
  spec.output_width = data.modalities[data.target].codes.width();
  return spec;
}

TrainingSet build_training_set(const Dataset& data, const ExperimentConfig& cfg) {
  std::vector<Example> examples;
  std::vector<std::string> liked, disliked;
  for (const auto& s : data.train) {
    if (data.task == Task::session) {
      for (std::size_t split = 1; split < s.size(); ++split) {
        if (auto ex = build_session_example(s, split, data.modalities, data.target, cfg.alpha, cfg.decay_w)) {
          examples.push_back(std::move(*ex));
        }
      }
    } else {
      split_user(cfg, s, liked, disliked);
      if (auto ex = build_topk_example(s.id, liked, disliked, data.modalities, data.target, cfg.split_ratio, cfg.seed)) {
        examples.push_back(std::move(*ex));
      }
    }
  }
  if (examples.empty()) fail(ErrorKind::invalid_argument, "no training examples (sessions too short?)");
  TrainingSet ts;
  ts.channels = input_channels(data);
  const auto rows = static_cast<Eigen::Index>(examples.size());
  ts.inputs.resize(rows, static_cast<Eigen::Index>(examples[0].input.size()));
  ts.targets.resize(rows, static_cast<Eigen::Index>(examples[0].target.size()));
  for (Eigen::Index r = 0; r < rows; ++r) {
    copy_row(ts.inputs, r, examples[static_cast<std::size_t>(r)].input);
    copy_row(ts.targets, r, examples[static_cast<std::size_t>(r)].target.values());
  }
  return ts;
}

TrainState train_model(const Dataset& data, const ExperimentConfig& cfg, std::optional<TrainState> resume,
                       int max_epochs) {
  TrainingSet ts = build_training_set(data, cfg);
  const ModelSpec spec = model_spec_for(data, cfg);
  TrainState state;
  if (resume) {
    state = std::move(*resume);
    const ModelSpec& s = state.params.spec;
    if (s.input_size != spec.input_size || s.output_depth != spec.output_depth || s.output_width != spec.output_width ||
        state.params.channels != ts.channels) {
      fail(ErrorKind::shape, "checkpoint layout does not match the configured modalities");
    }
  } else {
    state = start_training(spec, derive_seed(cfg.seed, kInitTag), ts.channels);
  }
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  train(state, ts.inputs, ts.targets, tc, max_epochs);
  return state;
}

EvalReport evaluate_dataset(const Dataset& data, const ExperimentConfig& cfg, EvalMode mode, const ModelParams* model,
                            std::vector<Prediction>* predictions) {
  if (mode == EvalMode::conditional) {
    if (!model) fail(ErrorKind::invalid_argument, "conditional evaluation needs a trained model");
    if (model->channels != input_channels(data)) {
      fail(ErrorKind::shape, "model input layout does not match the configured modalities");
    }
    if (model->spec.output_depth != data.catalog.depth() || model->spec.output_width != data.catalog.width()) {
      fail(ErrorKind::shape, "model output sketch does not match the target modality");
    }
  }
  const CodesMatrix& target_codes = data.modalities[data.target].codes;
  std::size_t depth = static_cast<std::size_t>(cfg.k);
  for (int k : cfg.k_list) depth = std::max(depth, static_cast<std::size_t>(k));

  std::vector<Example> points;
  std::vector<std::string> liked, disliked;
  for (const auto& s : data.test) {
    if (data.task == Task::session) {
      for (std::size_t split = 1; split < s.size(); ++split) {
        if (auto ex = build_session_example(s, split, data.modalities, data.target, cfg.alpha, cfg.decay_w)) {
          points.push_back(std::move(*ex));
        }
      }
    } else {
      split_user(cfg, s, liked, disliked);
      if (auto ex = build_topk_example(s.id, liked, disliked, data.modalities, data.target, cfg.split_ratio, cfg.seed)) {
        points.push_back(std::move(*ex));
      }
    }
  }
  if (points.empty()) fail(ErrorKind::invalid_argument, "empty evaluation set");
  std::unordered_map<std::string, const Session*> by_id;
  for (const auto& s : data.test) by_id[s.id] = &s;

  std::vector<double> pop_scores(data.catalog.size(), 0.0);
  {
    std::unordered_map<std::string, double> counts;
    for (const auto& p : data.popularity) counts[p.item_id] = p.score;
    for (std::size_t i = 0; i < data.catalog.size(); ++i) {
      auto it = counts.find(data.catalog.id(i));
      if (it != counts.end()) pop_scores[i] = it->second;
    }
  }

  // Conditional mode: output distributions for all points, in chunks.
  std::vector<Sketch> outputs;
  if (mode == EvalMode::conditional) {
    const int od = model->spec.output_depth, ow = model->spec.output_width;
    for (std::size_t start = 0; start < points.size(); start += kPredictChunk) {
      const std::size_t end = std::min(points.size(), start + kPredictChunk);
      Matrix x(static_cast<Eigen::Index>(end - start), static_cast<Eigen::Index>(model->spec.input_size));
      for (std::size_t i = start; i < end; ++i) {
        if (points[i].input.size() != model->spec.input_size) fail(ErrorKind::shape, "example/model input mismatch");
        copy_row(x, static_cast<Eigen::Index>(i - start), points[i].input);
      }
      Matrix logits = predict(*model, x);
      for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        outputs.push_back(softmax_sketch({logits.data() + r * logits.cols(), static_cast<std::size_t>(logits.cols())}, od, ow));
      }
    }
  }

  std::vector<std::vector<Scored>> rankings(points.size());
  parallel_for(points.size(), [&](std::size_t i) {
    const Example& ex = points[i];
    std::unordered_set<std::string> exclude;
    if (cfg.exclude_seen_items()) exclude.insert(ex.input_items.begin(), ex.input_items.end());
    auto pure_scores = [&] {
      Sketch q(target_codes.depth(), target_codes.width());
      if (data.task == Task::session) {
        q = session_history_sketch(*by_id.at(ex.session_id), ex.position, target_codes, cfg.alpha, cfg.decay_w);
      } else {
        for (const auto& id : ex.input_items) accumulate_row(q, target_codes, target_codes.index_of(id), 1.0);
      }
      normalize_in_place(q, Norm::l1);
      return decode_scores(q, data.catalog, cfg.aggregator);
    };
    std::vector<double> scores;
    switch (mode) {
      case EvalMode::conditional: scores = decode_scores(outputs[i], data.catalog, cfg.aggregator); break;
      case EvalMode::pure: scores = pure_scores(); break;
      case EvalMode::popularity: scores = pop_scores; break;
      case EvalMode::pure_pop:
        scores = pure_scores();
        for (std::size_t j = 0; j < scores.size(); ++j) scores[j] *= pop_scores[j];
        break;
    }
    rankings[i] = rank_items(data.catalog, scores, depth, exclude);
  });

  EvalReport report;
  SessionEvaluator sess(static_cast<std::size_t>(cfg.k));
  TopkEvaluator topk(cfg.k_list);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < points.size(); ++i) {
    ids.clear();
    for (const auto& s : rankings[i]) ids.push_back(s.item_id);
    const Example& ex = points[i];
    if (data.task == Task::session) {
      sess.add(ids, ex.target_items.front(), ex.target_items);
      topk.add(ids, std::span<const std::string>(ex.target_items.data(), 1));
    } else {
      topk.add(ids, ex.target_items);
    }
    if (predictions) {
      std::string pid = ex.session_id;
      if (data.task == Task::session) pid += ":" + std::to_string(ex.position);
      predictions->push_back({std::move(pid), std::move(rankings[i])});
    }
  }
  if (data.task == Task::session) report.session = sess.result();
  report.topk = topk.result();
  return report;
}

void write_metrics_csv(const EvalReport& report, const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write '" + path + "'");
  out << "metric,k,value\n";
  if (report.session) {
    const auto& m = *report.session;
    out << "MRR," << cfg.k << ',' << format_double(m.mrr) << '\n';
    out << "P," << cfg.k << ',' << format_double(m.precision) << '\n';
    out << "R," << cfg.k << ',' << format_double(m.recall) << '\n';
    out << "HR," << cfg.k << ',' << format_double(m.hit_rate) << '\n';
    out << "MAP," << cfg.k << ',' << format_double(m.map) << '\n';
  }
  for (const auto& [k, v] : report.topk.recall) out << "Recall," << k << ',' << format_double(v) << '\n';
  for (const auto& [k, v] : report.topk.ndcg) out << "NDCG," << k << ',' << format_double(v) << '\n';
}

std::string format_metrics_table(const EvalReport& report, const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(5);
  if (report.session) {
    const auto& m = *report.session;
    const std::string k = "@" + std::to_string(cfg.k);
    os << "prediction points: " << m.count << '\n';
    os << std::left << std::setw(12) << ("MRR" + k) << m.mrr << '\n'
       << std::setw(12) << ("P" + k) << m.precision << '\n'
       << std::setw(12) << ("R" + k) << m.recall << '\n'
       << std::setw(12) << ("HR" + k) << m.hit_rate << '\n'
       << std::setw(12) << ("MAP" + k) << m.map << '\n';
  } else {
    os << "users: " << report.topk.count << '\n';
  }
  for (const auto& [k, v] : report.topk.recall) {
    os << std::left << std::setw(12) << ("Recall@" + std::to_string(k)) << v << "   " << std::setw(10)
       << ("NDCG@" + std::to_string(k)) << report.topk.ndcg.at(k) << '\n';
  }
  return os.str();
}

void write_predictions_csv(const std::vector<Prediction>& predictions, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write '" + path + "'");
  out << "session_id,rank,item_id,score\n";
  for (const auto& p : predictions) {
    for (std::size_t r = 0; r < p.ranking.size(); ++r) {
      out << p.session_id << ',' << (r + 1) << ',' << p.ranking[r].item_id << ',' << format_double(p.ranking[r].score)
          << '\n';
    }
  }
}

namespace {

InteractionLog load_log(const ExperimentConfig& cfg) {
  if (cfg.interactions.empty()) fail(ErrorKind::invalid_argument, "config has no experiment.interactions path");
  return load_interactions(cfg.interactions);
}

void apply_threads(const ExperimentConfig& cfg) {
  if (cfg.threads > 0) set_thread_count(cfg.threads);
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::string run_fit_partitions(const ExperimentConfig& cfg) {
  apply_threads(cfg);
  Dataset data = prepare_dataset(cfg, load_log(cfg));
  std::ostringstream summary;
  for (std::size_t i = 0; i < data.modalities.size(); ++i) {
    const auto& m = data.modalities[i];
    if (data.partitionings[i]) save_partitioning(*data.partitionings[i], out_path(cfg, m.name + ".partitioning"));
    save_codes(m.codes, out_path(cfg, m.name + ".codes"));
    summary << m.name << ": " << m.codes.size() << " items, depth " << m.codes.depth() << ", width "
            << m.codes.width() << '\n';
  }
  if (data.dropped_events) summary << "warning: dropped " << data.dropped_events << " events with unknown items\n";
  return summary.str();
}

std::string run_encode(const ExperimentConfig& cfg, const std::string& modality, const std::vector<std::string>& items,
                       const std::vector<double>& weights, const std::string& out_file) {
  apply_threads(cfg);
  if (items.empty()) fail(ErrorKind::invalid_argument, "encode: no items given");
  if (!weights.empty() && weights.size() != items.size()) fail(ErrorKind::invalid_argument, "encode: one weight per item");
  Dataset data = prepare_dataset(cfg, load_log(cfg));
  const std::string name = modality.empty() ? data.modalities[data.target].name : modality;
  auto it = std::find_if(data.modalities.begin(), data.modalities.end(), [&](const auto& m) { return m.name == name; });
  if (it == data.modalities.end()) fail(ErrorKind::invalid_argument, "unknown modality '" + name + "'");
  Sketch s(it->codes.depth(), it->codes.width());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    if (!(w >= 0.0)) fail(ErrorKind::invalid_argument, "encode: weights must be non-negative");
    accumulate_row(s, it->codes, it->codes.index_of(items[i]), w);
  }
  const std::string path = out_file.empty() ? out_path(cfg, name + ".sketch") : out_file;
  save_sketch(s, path);
  return "wrote " + path + " (" + std::to_string(s.depth()) + "x" + std::to_string(s.width()) + ")\n";
}

std::string run_train(const ExperimentConfig& cfg, const std::string& resume_path, int max_epochs) {
  apply_threads(cfg);
  Dataset data = prepare_dataset(cfg, load_log(cfg));
  std::optional<TrainState> resume;
  if (!resume_path.empty()) resume = load_checkpoint(resume_path);
  TrainState state = train_model(data, cfg, std::move(resume), max_epochs);
  const std::string ckpt = out_path(cfg, "model.ckpt");
  save_checkpoint(state, ckpt);
  write_loss_csv(state.history, out_path(cfg, "loss.csv"));
  std::ostringstream os;
  for (const auto& h : state.history) os << "epoch " << h.epoch << "  loss " << h.loss << "  lr " << h.lr << '\n';
  os << "checkpoint: " << ckpt << '\n';
  return os.str();
}

std::string run_evaluate(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
  apply_threads(cfg);
  Dataset data = prepare_dataset(cfg, load_log(cfg));
  std::optional<TrainState> state;
  if (cfg.mode == EvalMode::conditional) {
    const std::string path =
        checkpoint_path.empty() ? (fs::path(cfg.output_dir) / "model.ckpt").string() : checkpoint_path;
    state = load_checkpoint(path);
  }
  std::vector<Prediction> predictions;
  EvalReport report = evaluate_dataset(data, cfg, cfg.mode, state ? &state->params : nullptr, &predictions);
  write_metrics_csv(report, cfg, out_path(cfg, "metrics.csv"));
  const std::string table = format_metrics_table(report, cfg);
  {
    std::ofstream txt(out_path(cfg, "metrics.txt"));
    txt << "mode: " << to_string(cfg.mode) << "  aggregator: " << to_string(cfg.aggregator) << '\n' << table;
  }
  write_predictions_csv(predictions, out_path(cfg, "predictions.csv"));
  return "mode: " + to_string(cfg.mode) + "  aggregator: " + to_string(cfg.aggregator) + "\n" + table;
}

std::string run_density_sweep(const ExperimentConfig& cfg) {
  apply_threads(cfg);
  const DensityConfig& d = cfg.density;
  if (d.seeds < 1) fail(ErrorKind::invalid_argument, "density.seeds must be >= 1");
  GaussianMixture mix = make_mixture(d.dim, d.components, derive_seed(cfg.seed, 1), d.center_scale);
  PointMatrix data = sample_mixture(mix, d.points, derive_seed(cfg.seed, 2));
  PointMatrix queries = sample_mixture(mix, d.queries, derive_seed(cfg.seed, 3));
  const double bw = median_pairwise_l1(data, d.bandwidth_sample, derive_seed(cfg.seed, 4));
  auto oracle = brute_force_kde(data, queries, bw).estimates;
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < d.seeds; ++i) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(i));
  auto rows = nk_sweep(data, queries, oracle, d.depths, d.bits, seeds, d.aggregator);
  write_sweep_csv(rows, out_path(cfg, "density_sweep.csv"));
  std::ostringstream os;
  os << "bandwidth (median pairwise L1): " << bw << '\n' << "median pearson over " << d.seeds << " seeds\n";
  os << std::fixed << std::setprecision(4);
  for (int n : d.depths) {
    for (int k : d.bits) {
      std::vector<double> v;
      for (const auto& r : rows) {
        if (r.depth == n && r.bits == k) v.push_back(r.pearson);
      }
      os << "N=" << n << " K=" << k << "  " << median(v) << '\n';
    }
  }
  return os.str();
}

std::string run_ablate(const ExperimentConfig& cfg) {
  apply_threads(cfg);
  const InteractionLog log = load_log(cfg);
  if (cfg.ablate_seeds < 1) fail(ErrorKind::invalid_argument, "ablate.seeds must be >= 1");
  std::map<std::string, EmbeddingTable> tables;
  for (const auto& m : cfg.modalities) {
    if (m.kind == ModalityConfig::Kind::dlsh) tables.emplace(m.name, load_embeddings(m.embeddings, m.name));
  }
  const bool session = cfg.task == Task::session;
  const std::string headline = session ? "MRR@" + std::to_string(cfg.k) : "NDCG@20";
  auto headline_value = [&](const EvalReport& r) {
    if (session) return r.session->mrr;
    auto it = r.topk.ndcg.find(20);
    return it == r.topk.ndcg.end() ? r.topk.ndcg.rbegin()->second : it->second;
  };

  std::ofstream csv(out_path(cfg, "ablation.csv"));
  csv << "variant,seed,metric,k,value\n";
  std::map<std::string, std::vector<double>> summary;
  auto record = [&](const std::string& variant, std::uint64_t seed, const EvalReport& r) {
    if (r.session) {
      csv << variant << ',' << seed << ",MRR," << cfg.k << ',' << format_double(r.session->mrr) << '\n';
      csv << variant << ',' << seed << ",R," << cfg.k << ',' << format_double(r.session->recall) << '\n';
      csv << variant << ',' << seed << ",HR," << cfg.k << ',' << format_double(r.session->hit_rate) << '\n';
    }
    for (const auto& [k, v] : r.topk.recall) csv << variant << ',' << seed << ",Recall," << k << ',' << format_double(v) << '\n';
    for (const auto& [k, v] : r.topk.ndcg) csv << variant << ',' << seed << ",NDCG," << k << ',' << format_double(v) << '\n';
    summary[variant].push_back(headline_value(r));
  };

  for (int s = 0; s < cfg.ablate_seeds; ++s) {
    ExperimentConfig run = cfg;
    for (auto& m : run.modalities) m.seed += static_cast<std::uint64_t>(s);
    const std::uint64_t seed_col = static_cast<std::uint64_t>(s);
    Dataset data = prepare_dataset(run, log, tables);
    for (Aggregator agg : {Aggregator::gmean, Aggregator::min, Aggregator::mean, Aggregator::hmean}) {
      ExperimentConfig a = run;
      a.aggregator = agg;
      record("pure_" + to_string(agg), seed_col, evaluate_dataset(data, a, EvalMode::pure, nullptr));
    }
    record("popularity", seed_col, evaluate_dataset(data, run, EvalMode::popularity, nullptr));
    record("pure_pop", seed_col, evaluate_dataset(data, run, EvalMode::pure_pop, nullptr));

    ExperimentConfig rnd = run;
    for (auto& m : rnd.modalities) {
      if (m.kind == ModalityConfig::Kind::dlsh) {
        m.width = m.effective_width();
        m.kind = ModalityConfig::Kind::random;
      }
    }
    Dataset rdata = prepare_dataset(rnd, log, tables);
    record("pure_gmean_random_codes", seed_col, evaluate_dataset(rdata, rnd, EvalMode::pure, nullptr));

    if (cfg.ablate_conditional) {
      TrainState st = train_model(data, run);
      record("conditional", seed_col, evaluate_dataset(data, run, EvalMode::conditional, &st.params));
    }
  }
  std::ostringstream os;
  os << "median " << headline << " over " << cfg.ablate_seeds << " seeds\n" << std::fixed << std::setprecision(5);
  for (const auto& [variant, values] : summary) os << std::left << std::setw(26) << variant << median(values) << '\n';
  return os.str();
}

std::string write_toy_dataset(const std::string& dir, std::uint64_t seed) {
  fs::create_directories(dir);
  ClusteredCatalog cat = make_clustered_catalog(8, 25, 16, 0.35, derive_seed(seed, 1));
  save_embeddings(cat.embeddings, (fs::path(dir) / "items.emb").string());
  SessionSpec spec;
  spec.sessions = 600;
  spec.min_length = 3;
  spec.max_length = 8;
  spec.transition = Transition::same_cluster;
  spec.jump_probability = 0.1;
  save_interactions(make_sessions(cat, spec, derive_seed(seed, 2)), (fs::path(dir) / "sessions.csv").string());
  save_interactions(make_topk_users(cat, 400, 4, 12, 3, derive_seed(seed, 3)), (fs::path(dir) / "users.csv").string());
  return "wrote items.emb, sessions.csv, users.csv to " + dir + "\n";
}

}  // namespace emde
