#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "emde/common.hpp"
#include "emde/experiment.hpp"
#include "support.hpp"

using namespace emde;
namespace fs = std::filesystem;

namespace {

std::string toy_config(const std::string& task) {
  std::ostringstream os;
  os << "[experiment]\ntask = " << task << "\ninteractions = " << (task == "session" ? "sessions.csv" : "users.csv")
     << "\noutput_dir = out\nseed = 3\n"
     << "[modality.meta]\ntype = dlsh\nembeddings = items.emb\ndepth = 6\nbits = 4\nseed = 1\n"
     << "[model]\nhidden_layers = 1\nhidden_width = 32\n"
     << "[train]\nepochs = 2\nbatch_size = 64\nlearning_rate = 0.004\ngamma = 0.5\n"
     << "[evaluate]\nk = 10\nk_list = 1,5,10\n";
  return os.str();
}

struct Toy {
  testing::TempDir dir{"exp"};
  Toy() { write_toy_dataset(dir.path(), 7); }
  ExperimentConfig config(const std::string& task, const ConfigOverrides& o = {}) {
    testing::write_file(dir.file(task + ".ini"), toy_config(task));
    return load_config(dir.file(task + ".ini"), o);
  }
};

std::map<std::string, std::string> metric_rows(const std::string& path) {
  std::map<std::string, std::string> rows;
  std::istringstream in(testing::read_file(path));
  std::string line;
  std::getline(in, line);
  CHECK(line == "metric,k,value");
  while (std::getline(in, line)) {
    const auto last = line.rfind(',');
    rows[line.substr(0, last)] = line.substr(last + 1);
  }
  return rows;
}

}  // namespace

TEST_CASE("defaults") {
  ExperimentConfig c;
  CHECK(c.train.epochs == 5);
  CHECK(c.train.batch_size == 256);
  CHECK(c.train.learning_rate == 0.004);
  CHECK(c.train.gamma == 0.5);
  CHECK(c.alpha == 0.95);
  CHECK(c.decay_w == 0.01);
  ModalityConfig m;
  CHECK(m.depth == 10);
  CHECK(m.bits == 7);
  CHECK(m.effective_width() == 128);
}

TEST_CASE("config parsing and overrides") {
  const std::string text =
      "[experiment]\ninteractions = log.csv\noutput_dir = o\n"
      "[modality.meta]\nembeddings = /abs/m.emb\ndepth = 4\nbits = 3\n"
      "[modality.ids]\ntype = random\nwidth = 50\n";
  auto c = parse_config(text, "/base");
  CHECK(c.interactions == "/base/log.csv");
  CHECK(c.output_dir == "/base/o");
  REQUIRE(c.modalities.size() == 2);
  CHECK(c.modalities[0].embeddings == "/abs/m.emb");
  CHECK(c.modalities[0].effective_width() == 8);
  CHECK(c.modalities[1].kind == ModalityConfig::Kind::random);
  CHECK(c.target_index() == 0);

  auto o = parse_config(text, "/base", {{"modality.meta.depth", "12"}, {"experiment.seed", "9"}, {"evaluate.mode", "pure"}});
  CHECK(o.modalities[0].depth == 12);
  CHECK(o.seed == 9);
  CHECK(o.mode == EvalMode::pure);

  CHECK_THROWS_AS(parse_config(text + "[experiment]\nbogus = 1\n", "/b"), Error);
  CHECK_THROWS_AS(parse_config(text + "[nosuch]\nx = 1\n", "/b"), Error);
  CHECK_THROWS_AS(parse_config(text, "/b", {{"experiment.nope", "1"}}), Error);
  CHECK_THROWS_AS(parse_config(text, "/b", {{"noseparator", "1"}}), Error);
  CHECK_THROWS_AS(parse_config(text, "/b", {{"modality.meta.depth", "x"}}), Error);
  CHECK_THROWS_AS(parse_config(text, "/b", {{"modality.meta.depth", "0"}}).validate(), Error);
  CHECK_THROWS_AS(parse_config("[experiment]\nseed = 1\n", "/b").validate(), Error);
  CHECK_THROWS_AS(parse_config(text, "/b", {{"experiment.target_modality", "zz"}}).validate(), Error);
  CHECK_THROWS_AS(parse_config(text, "/b", {{"train.gamma", "0"}}).validate(), Error);
  CHECK_THROWS_AS(parse_config(text, "/b", {{"evaluate.aggregator", "median"}}), Error);
  CHECK_THROWS_AS(load_config("/nonexistent/x.ini"), Error);
}

TEST_CASE("dataset preparation") {
  Toy toy;
  auto cfg = toy.config("session");
  Dataset d = prepare_dataset(cfg, load_interactions(cfg.interactions));
  CHECK(d.dropped_events == 0);
  CHECK(d.test.size() == 120);
  CHECK(d.train.size() == 480);
  std::set<std::string> train_ids, test_ids;
  for (const auto& s : d.train) train_ids.insert(s.id);
  for (const auto& s : d.test) CHECK(train_ids.count(s.id) == 0);
  CHECK(d.catalog.depth() == 6);
  CHECK(d.catalog.width() == 16);
  CHECK(d.partitionings[0].has_value());

  Dataset again = prepare_dataset(cfg, load_interactions(cfg.interactions));
  REQUIRE(again.test.size() == d.test.size());
  for (std::size_t i = 0; i < d.test.size(); ++i) CHECK(again.test[i].id == d.test[i].id);

  // A log with an unknown item keeps the rest.
  auto log = load_interactions(cfg.interactions);
  log.records.push_back({"extra", "not-an-item", 0, "view", 1});
  log.records.push_back({"extra", log.records[0].item_id, 1, "view", 1});
  Dataset dd = prepare_dataset(cfg, log);
  CHECK(dd.dropped_events == 1);
}

TEST_CASE("missing embedding file names the path") {
  Toy toy;
  auto cfg = toy.config("session", {{"modality.meta.embeddings", "gone.emb"}});
  try {
    run_fit_partitions(cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("gone.emb") != std::string::npos);
    CHECK(e.kind() == ErrorKind::io);
  }
}

TEST_CASE("session pipeline end to end") {
  Toy toy;
  auto cfg = toy.config("session");
  run_fit_partitions(cfg);
  CHECK(fs::exists(fs::path(cfg.output_dir) / "meta.codes"));
  CHECK(fs::exists(fs::path(cfg.output_dir) / "meta.partitioning"));

  const std::string sk = run_encode(cfg, "", {"i00001", "i00002"}, {1.0, 2.0}, "");
  CHECK(sk.find("6x16") != std::string::npos);
  auto sketch = load_sketch((fs::path(cfg.output_dir) / "meta.sketch").string());
  double total = 0;
  for (double v : sketch.values()) total += v;
  CHECK(total == doctest::Approx(18.0));
  CHECK_THROWS_AS(run_encode(cfg, "", {"nope"}, {}, ""), Error);
  CHECK_THROWS_AS(run_encode(cfg, "other", {"i00001"}, {}, ""), Error);
  CHECK_THROWS_AS(run_encode(cfg, "", {"i00001"}, {-1.0}, ""), Error);

  run_train(cfg, "", 0);
  auto state = load_checkpoint((fs::path(cfg.output_dir) / "model.ckpt").string());
  CHECK(state.epochs_done == 2);
  run_evaluate(cfg, "");
  auto rows = metric_rows((fs::path(cfg.output_dir) / "metrics.csv").string());
  for (const char* m : {"MRR,10", "P,10", "R,10", "HR,10", "MAP,10", "Recall,1", "Recall,5", "Recall,10", "NDCG,1",
                        "NDCG,5", "NDCG,10"}) {
    CHECK_MESSAGE(rows.count(m) == 1, m);
  }
  CHECK(rows.size() == 11);
  CHECK(fs::exists(fs::path(cfg.output_dir) / "predictions.csv"));
}

TEST_CASE("evaluation cutoffs bound the prediction lists") {
  Toy toy;
  auto cfg = toy.config("session", {{"evaluate.mode", "pure"}, {"evaluate.k", "7"}, {"evaluate.k_list", "3,7"}});
  Dataset d = prepare_dataset(cfg, load_interactions(cfg.interactions));
  std::vector<Prediction> preds;
  auto r = evaluate_dataset(d, cfg, EvalMode::pure, nullptr, &preds);
  REQUIRE(r.session);
  REQUIRE_FALSE(preds.empty());
  for (const auto& p : preds) CHECK(p.ranking.size() <= 7);
  CHECK(r.topk.recall.count(3) == 1);
  CHECK(r.topk.recall.count(7) == 1);
  CHECK(r.session->mrr >= 0);
  CHECK(r.session->mrr <= r.session->hit_rate);
  CHECK_THROWS_AS(evaluate_dataset(d, cfg, EvalMode::conditional, nullptr), Error);
}

TEST_CASE("pure_pop and popularity on top-k data") {
  Toy toy;
  auto cfg = toy.config("topk");
  Dataset d = prepare_dataset(cfg, load_interactions(cfg.interactions));
  auto pop = evaluate_dataset(d, cfg, EvalMode::popularity, nullptr);
  auto pure = evaluate_dataset(d, cfg, EvalMode::pure, nullptr);
  auto mix = evaluate_dataset(d, cfg, EvalMode::pure_pop, nullptr);
  CHECK_FALSE(pop.session);
  for (int k : {1, 5, 10}) {
    for (const auto* r : {&pop, &pure, &mix}) {
      CHECK(r->topk.ndcg.at(k) >= 0.0);
      CHECK(r->topk.ndcg.at(k) <= 1.0);
      CHECK(r->topk.recall.at(k) <= 1.0);
    }
  }
  CHECK(pure.topk.ndcg.at(10) > pop.topk.ndcg.at(10));
  CHECK(pop.topk.count == d.test.size());
}

TEST_CASE("training resumes to the same weights") {
  Toy toy;
  auto cfg = toy.config("topk", {{"train.epochs", "3"}});
  Dataset d = prepare_dataset(cfg, load_interactions(cfg.interactions));
  TrainState full = train_model(d, cfg);
  TrainState part = train_model(d, cfg, {}, 1);
  CHECK(part.epochs_done == 1);
  TrainState rest = train_model(d, cfg, part, 0);
  CHECK(rest.epochs_done == 3);
  REQUIRE(rest.history.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(rest.history[i].loss == full.history[i].loss);
  testing::TempDir tmp("ck");
  save_checkpoint(full, tmp.file("a"));
  save_checkpoint(rest, tmp.file("b"));
  CHECK(testing::read_file(tmp.file("a")) == testing::read_file(tmp.file("b")));
}

TEST_CASE("ablation and density sweep write their tables") {
  Toy toy;
  auto cfg = toy.config("session", {{"ablate.seeds", "1"}});
  const std::string s = run_ablate(cfg);
  for (const char* v : {"pure_gmean", "pure_min", "pure_mean", "pure_hmean", "popularity", "pure_pop",
                        "pure_gmean_random_codes"}) {
    CHECK(s.find(v) != std::string::npos);
  }
  CHECK(s.find("conditional") == std::string::npos);
  CHECK(fs::exists(fs::path(cfg.output_dir) / "ablation.csv"));

  auto dc = toy.config("session", {{"density.points", "400"}, {"density.queries", "50"}, {"density.n_values", "2,4"},
                                   {"density.k_values", "3"}, {"density.seeds", "2"}, {"density.bandwidth_sample", "100"}});
  run_density_sweep(dc);
  const std::string csv = testing::read_file((fs::path(dc.output_dir) / "density_sweep.csv").string());
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "N,K,seed,pearson");
  int n = 0;
  while (std::getline(in, line)) ++n;
  CHECK(n == 4);
}

TEST_CASE("shipped configs parse and validate") {
  int n = 0;
  for (const char* sub : {"configs", "configs/presets"}) {
    for (const auto& e : fs::directory_iterator(fs::path(EMDE_SOURCE_DIR) / sub)) {
      if (e.path().extension() != ".ini") continue;
      CAPTURE(e.path().string());
      auto c = load_config(e.path().string());
      CHECK_NOTHROW(c.validate());
      ++n;
    }
  }
  CHECK(n >= 15);
  auto retail = load_config(std::string(EMDE_SOURCE_DIR) + "/configs/presets/retail.ini");
  CHECK(retail.alpha == 0.95);
  CHECK(retail.modalities[0].effective_width() == 128);
  auto ml = load_config(std::string(EMDE_SOURCE_DIR) + "/configs/presets/ml20m.ini");
  CHECK(ml.modalities[0].depth == 30);
  CHECK(ml.modalities[0].effective_width() == 350);
  CHECK(ml.model.hidden_width == 12000);
}
