// Command-line front end. Talks to the library only through emde.h.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "emde/emde.h"

namespace {

struct Failure {
  emde_status status;
};

void check(emde_status st) {
  if (st != EMDE_OK) throw Failure{st};
}

struct ConfigDeleter {
  void operator()(emde_config* c) const { emde_config_free(c); }
};
using ConfigPtr = std::unique_ptr<emde_config, ConfigDeleter>;

struct Globals {
  std::string config;
  std::optional<unsigned long long> seed;
  int threads = 0;
  std::string out;
  std::vector<std::string> sets;
};

ConfigPtr open_config(const Globals& g) {
  if (g.config.empty()) {
    std::cerr << "error: --config is required for this command\n";
    throw Failure{EMDE_ERR_INVALID_ARGUMENT};
  }
  emde_config* raw = nullptr;
  check(emde_config_load(g.config.c_str(), &raw));
  ConfigPtr cfg(raw);
  if (g.seed) check(emde_config_set(cfg.get(), "experiment.seed", std::to_string(*g.seed).c_str()));
  if (g.threads > 0) check(emde_config_set(cfg.get(), "experiment.threads", std::to_string(g.threads).c_str()));
  if (!g.out.empty()) {
    const std::string abs = std::filesystem::absolute(g.out).lexically_normal().string();
    check(emde_config_set(cfg.get(), "experiment.output_dir", abs.c_str()));
  }
  for (const auto& kv : g.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::cerr << "error: --set expects section.key=value, got '" << kv << "'\n";
      throw Failure{EMDE_ERR_INVALID_ARGUMENT};
    }
    check(emde_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
  }
  return cfg;
}

void print_summary(char* summary) {
  if (summary) {
    std::fputs(summary, stdout);
    emde_string_free(summary);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EMDE sketch-based recommender and density estimator"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(emde_version()));

  Globals g;
  app.add_option("-c,--config", g.config, "experiment config (INI)");
  app.add_option("--seed", g.seed, "override experiment.seed");
  app.add_option("--threads", g.threads, "worker threads (default: EMDE_THREADS or 1)")->check(CLI::NonNegativeNumber);
  app.add_option("-o,--out", g.out, "override experiment.output_dir");
  app.add_option("--set", g.sets, "override any config key: section.key=value")->take_all();

  auto* fit = app.add_subcommand("fit-partitions", "fit DLSH partitionings and write codes for every modality");

  auto* encode = app.add_subcommand("encode", "encode an item multiset into a sketch");
  std::string modality, encode_out;
  std::vector<std::string> items;
  std::vector<double> weights;
  encode->add_option("--modality", modality, "modality (default: target modality)");
  encode->add_option("--weights", weights, "one weight per item")->delimiter(',');
  encode->add_option("--output", encode_out, "sketch file (default: <out>/<modality>.sketch)");
  encode->add_option("items", items, "item ids")->required()->delimiter(',');

  auto* train = app.add_subcommand("train", "train the conditional model");
  std::string resume;
  int max_epochs = 0;
  train->add_option("--resume", resume, "checkpoint to resume from");
  train->add_option("--max-epochs", max_epochs, "train at most this many more epochs");

  auto* evaluate = app.add_subcommand("evaluate", "rank the test split and write metrics");
  std::string checkpoint, mode, aggregator;
  std::optional<int> k;
  evaluate->add_option("--checkpoint", checkpoint, "model checkpoint (default: <out>/model.ckpt)");
  evaluate->add_option("--mode", mode, "conditional|pure|popularity|pure_pop");
  evaluate->add_option("--aggregator", aggregator, "gmean|min|mean|hmean");
  evaluate->add_option("-k", k, "ranking cutoff for session metrics");

  auto* density = app.add_subcommand("density-sweep", "EMDE density vs Laplacian KDE over (N, K)");
  auto* ablate = app.add_subcommand("ablate", "compare aggregators, baselines and random codes");

  auto* toy = app.add_subcommand("make-toy", "write a small synthetic dataset");
  std::string toy_dir;
  toy->add_option("dir", toy_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (g.threads > 0) emde_set_threads(g.threads);
  char* summary = nullptr;
  try {
    if (toy->parsed()) {
      check(emde_make_toy_dataset(toy_dir.c_str(), g.seed.value_or(7), &summary));
    } else {
      ConfigPtr cfg = open_config(g);
      if (fit->parsed()) {
        check(emde_cmd_fit_partitions(cfg.get(), &summary));
      } else if (encode->parsed()) {
        std::vector<const char*> ids;
        for (const auto& s : items) ids.push_back(s.c_str());
        if (!weights.empty() && weights.size() != items.size()) {
          std::cerr << "error: --weights needs one value per item\n";
          return EMDE_ERR_INVALID_ARGUMENT;
        }
        check(emde_cmd_encode(cfg.get(), modality.c_str(), ids.data(), weights.empty() ? nullptr : weights.data(),
                              ids.size(), encode_out.c_str(), &summary));
      } else if (train->parsed()) {
        check(emde_cmd_train(cfg.get(), resume.empty() ? nullptr : resume.c_str(), max_epochs, &summary));
      } else if (evaluate->parsed()) {
        if (!mode.empty()) check(emde_config_set(cfg.get(), "evaluate.mode", mode.c_str()));
        if (!aggregator.empty()) check(emde_config_set(cfg.get(), "evaluate.aggregator", aggregator.c_str()));
        if (k) check(emde_config_set(cfg.get(), "evaluate.k", std::to_string(*k).c_str()));
        check(emde_cmd_evaluate(cfg.get(), checkpoint.empty() ? nullptr : checkpoint.c_str(), &summary));
      } else if (density->parsed()) {
        check(emde_cmd_density_sweep(cfg.get(), &summary));
      } else if (ablate->parsed()) {
        check(emde_cmd_ablate(cfg.get(), &summary));
      }
    }
  } catch (const Failure& f) {
    const char* msg = emde_last_error();
    if (msg && *msg) std::cerr << "error: " << msg << '\n';
    return static_cast<int>(f.status);
  }
  print_summary(summary);
  return 0;
}
