#include "emde/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "emde/common.hpp"

namespace emde {

namespace fs = std::filesystem;

EvalMode parse_eval_mode(const std::string& s) {
  if (s == "conditional") return EvalMode::conditional;
  if (s == "pure") return EvalMode::pure;
  if (s == "popularity") return EvalMode::popularity;
  if (s == "pure_pop") return EvalMode::pure_pop;
  fail(ErrorKind::invalid_argument, "unknown evaluation mode '" + s + "' (conditional|pure|popularity|pure_pop)");
}

std::string to_string(EvalMode m) {
  switch (m) {
    case EvalMode::conditional: return "conditional";
    case EvalMode::pure: return "pure";
    case EvalMode::popularity: return "popularity";
    case EvalMode::pure_pop: return "pure_pop";
  }
  return "?";
}

std::size_t ExperimentConfig::target_index() const {
  if (target_modality.empty()) return 0;
  for (std::size_t i = 0; i < modalities.size(); ++i) {
    if (modalities[i].name == target_modality) return i;
  }
  fail(ErrorKind::invalid_argument, "target_modality '" + target_modality + "' is not a configured modality");
}

void ExperimentConfig::validate() const {
  if (modalities.empty()) fail(ErrorKind::invalid_argument, "config defines no [modality.<name>] section");
  std::set<std::string> names;
  for (const auto& m : modalities) {
    if (!names.insert(m.name).second) fail(ErrorKind::invalid_argument, "duplicate modality '" + m.name + "'");
    if (m.depth < 1) fail(ErrorKind::invalid_argument, "modality " + m.name + ": depth must be >= 1");
    if (m.kind == ModalityConfig::Kind::dlsh) {
      if (m.embeddings.empty()) fail(ErrorKind::invalid_argument, "modality " + m.name + ": dlsh needs an embeddings path");
      if (m.bits < 1 || m.bits > 30) fail(ErrorKind::invalid_argument, "modality " + m.name + ": bits must be in [1, 30]");
    }
    if (m.effective_width() < 1) fail(ErrorKind::invalid_argument, "modality " + m.name + ": width must be >= 1");
  }
  target_index();
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) fail(ErrorKind::invalid_argument, "test_fraction must be in (0, 1)");
  if (!(alpha > 0.0 && alpha <= 1.0) || !(decay_w > 0.0 && decay_w <= 1.0)) {
    fail(ErrorKind::invalid_argument, "decay alpha and w must be in (0, 1]");
  }
  if (k < 1) fail(ErrorKind::invalid_argument, "k must be >= 1");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) fail(ErrorKind::invalid_argument, "split_ratio must be in (0, 1)");
  train.validate();
}

namespace {

struct Section {
  std::string name;
  std::vector<std::pair<std::string, std::string>> entries;
};

void set_entry(std::vector<Section>& sections, const std::string& section, const std::string& key,
               const std::string& value) {
  for (auto& s : sections) {
    if (s.name != section) continue;
    for (auto& [k, v] : s.entries) {
      if (k == key) {
        v = value;
        return;
      }
    }
    s.entries.emplace_back(key, value);
    return;
  }
  sections.push_back({section, {{key, value}}});
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(ErrorKind::format, key + ": expected a boolean, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const auto& part : split(v, ',')) {
    if (part.empty()) continue;
    try {
      out.push_back(static_cast<int>(parse_int(part)));
    } catch (const Error&) {
      fail(ErrorKind::format, key + ": expected a comma-separated integer list");
    }
  }
  if (out.empty()) fail(ErrorKind::format, key + ": empty list");
  return out;
}

std::string resolve(const std::string& base_dir, const std::string& p) {
  if (p.empty() || base_dir.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base_dir) / p).lexically_normal().string();
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir, const ConfigOverrides& overrides) {
  boost::property_tree::ptree tree;
  try {
    std::istringstream in(text);
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    fail(ErrorKind::format, std::string("config: ") + e.what());
  }
  std::vector<Section> sections;
  for (const auto& [name, child] : tree) {
    if (child.empty()) fail(ErrorKind::format, "config: key '" + name + "' outside of a section");
    Section s{name, {}};
    for (const auto& [key, value] : child) s.entries.emplace_back(key, value.data());
    sections.push_back(std::move(s));
  }
  for (const auto& [path, value] : overrides) {
    const auto dot = path.rfind('.');
    if (dot == std::string::npos || dot == 0) fail(ErrorKind::invalid_argument, "override '" + path + "' must be section.key");
    set_entry(sections, path.substr(0, dot), path.substr(dot + 1), value);
  }

  ExperimentConfig cfg;
  for (const auto& section : sections) {
    const std::string& sec = section.name;
    const bool is_modality = sec.rfind("modality.", 0) == 0;
    ModalityConfig modality;
    if (is_modality) {
      modality.name = sec.substr(std::string("modality.").size());
      if (modality.name.empty()) fail(ErrorKind::format, "config: empty modality name");
    }
    for (const auto& [key, value] : section.entries) {
      const std::string full = sec + "." + key;
      auto num = [&] {
        try {
          return parse_double(value);
        } catch (const Error&) {
          fail(ErrorKind::format, "config " + full + ": expected a number, got '" + value + "'");
        }
      };
      auto integer = [&] {
        try {
          return parse_int(value);
        } catch (const Error&) {
          fail(ErrorKind::format, "config " + full + ": expected an integer, got '" + value + "'");
        }
      };
      bool known = true;
      if (is_modality) {
        if (key == "type") {
          if (value == "dlsh") modality.kind = ModalityConfig::Kind::dlsh;
          else if (value == "random") modality.kind = ModalityConfig::Kind::random;
          else fail(ErrorKind::format, "config " + full + ": expected dlsh or random");
        } else if (key == "embeddings") modality.embeddings = resolve(base_dir, value);
        else if (key == "depth") modality.depth = static_cast<int>(integer());
        else if (key == "bits") modality.bits = static_cast<int>(integer());
        else if (key == "width") modality.width = static_cast<int>(integer());
        else if (key == "seed") modality.seed = static_cast<std::uint64_t>(integer());
        else known = false;
      } else if (sec == "experiment") {
        if (key == "task") {
          if (value == "session") cfg.task = Task::session;
          else if (value == "topk") cfg.task = Task::topk;
          else fail(ErrorKind::format, "config " + full + ": expected session or topk");
        } else if (key == "interactions") cfg.interactions = resolve(base_dir, value);
        else if (key == "output_dir") cfg.output_dir = resolve(base_dir, value);
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(integer());
        else if (key == "threads") cfg.threads = static_cast<int>(integer());
        else if (key == "test_fraction") cfg.test_fraction = num();
        else if (key == "target_modality") cfg.target_modality = value;
        else known = false;
      } else if (sec == "decay") {
        if (key == "alpha") cfg.alpha = num();
        else if (key == "w") cfg.decay_w = num();
        else known = false;
      } else if (sec == "model") {
        if (key == "hidden_layers") cfg.model.hidden_layers = static_cast<int>(integer());
        else if (key == "hidden_width") cfg.model.hidden_width = static_cast<std::size_t>(integer());
        else if (key == "residual") cfg.model.residual = parse_bool(full, value);
        else if (key == "batch_norm") cfg.model.batch_norm = parse_bool(full, value);
        else if (key == "leaky_slope") cfg.model.leaky_slope = num();
        else known = false;
      } else if (sec == "train") {
        if (key == "epochs") cfg.train.epochs = static_cast<int>(integer());
        else if (key == "batch_size") cfg.train.batch_size = static_cast<std::size_t>(integer());
        else if (key == "learning_rate") cfg.train.learning_rate = num();
        else if (key == "gamma") cfg.train.gamma = num();
        else known = false;
      } else if (sec == "evaluate") {
        if (key == "mode") cfg.mode = parse_eval_mode(value);
        else if (key == "aggregator") cfg.aggregator = parse_aggregator(value);
        else if (key == "k") cfg.k = static_cast<int>(integer());
        else if (key == "k_list") cfg.k_list = parse_int_list(full, value);
        else if (key == "exclude_seen") cfg.exclude_seen = parse_bool(full, value) ? 1 : 0;
        else if (key == "split_ratio") cfg.split_ratio = num();
        else if (key == "dislike_event") cfg.dislike_event = value;
        else known = false;
      } else if (sec == "density") {
        if (key == "dim") cfg.density.dim = static_cast<std::size_t>(integer());
        else if (key == "components") cfg.density.components = static_cast<int>(integer());
        else if (key == "center_scale") cfg.density.center_scale = num();
        else if (key == "points") cfg.density.points = static_cast<std::size_t>(integer());
        else if (key == "queries") cfg.density.queries = static_cast<std::size_t>(integer());
        else if (key == "n_values") cfg.density.depths = parse_int_list(full, value);
        else if (key == "k_values") cfg.density.bits = parse_int_list(full, value);
        else if (key == "seeds") cfg.density.seeds = static_cast<int>(integer());
        else if (key == "bandwidth_sample") cfg.density.bandwidth_sample = static_cast<std::size_t>(integer());
        else if (key == "aggregator") cfg.density.aggregator = parse_aggregator(value);
        else known = false;
      } else if (sec == "ablate") {
        if (key == "seeds") cfg.ablate_seeds = static_cast<int>(integer());
        else if (key == "conditional") cfg.ablate_conditional = parse_bool(full, value);
        else known = false;
      } else {
        fail(ErrorKind::format, "config: unknown section [" + sec + "]");
      }
      if (!known) fail(ErrorKind::format, "config: unknown key '" + full + "'");
    }
    if (is_modality) cfg.modalities.push_back(std::move(modality));
  }
  cfg.train.seed = cfg.seed;
  return cfg;
}

ExperimentConfig load_config(const std::string& path, const ConfigOverrides& overrides) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  std::string base = fs::path(path).parent_path().string();
  if (base.empty()) base = ".";
  ExperimentConfig cfg = parse_config(buf.str(), base, overrides);
  cfg.source = path;
  return cfg;
}

}  // namespace emde
