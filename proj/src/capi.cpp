#include "emde/emde.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "emde/common.hpp"
#include "emde/config.hpp"
#include "emde/embeddings.hpp"
#include "emde/experiment.hpp"
#include "emde/partitioner.hpp"
#include "emde/sketch.hpp"

struct emde_embeddings {
  emde::EmbeddingTable table;
};
struct emde_partitioning {
  emde::Partitioning p;
};
struct emde_codes {
  emde::CodesMatrix codes;
};
struct emde_sketch {
  emde::Sketch s;
};
struct emde_config {
  std::string path;
  emde::ConfigOverrides overrides;

  emde::ExperimentConfig load() const { return emde::load_config(path, overrides); }
};

namespace {

thread_local std::string g_last_error;

emde_status to_status(emde::ErrorKind k) {
  switch (k) {
    case emde::ErrorKind::invalid_argument: return EMDE_ERR_INVALID_ARGUMENT;
    case emde::ErrorKind::io: return EMDE_ERR_IO;
    case emde::ErrorKind::format: return EMDE_ERR_FORMAT;
    case emde::ErrorKind::shape: return EMDE_ERR_SHAPE;
    case emde::ErrorKind::numeric: return EMDE_ERR_NUMERIC;
    case emde::ErrorKind::not_found: return EMDE_ERR_NOT_FOUND;
  }
  return EMDE_ERR_INTERNAL;
}

template <typename F>
emde_status guarded(F&& body) {
  try {
    body();
    return EMDE_OK;
  } catch (const emde::Error& e) {
    g_last_error = e.what();
    return to_status(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return EMDE_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return EMDE_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return EMDE_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) emde::fail(emde::ErrorKind::invalid_argument, std::string(what) + " must not be NULL");
}

emde::Aggregator to_agg(emde_aggregator a) {
  switch (a) {
    case EMDE_AGG_GMEAN: return emde::Aggregator::gmean;
    case EMDE_AGG_MIN: return emde::Aggregator::min;
    case EMDE_AGG_MEAN: return emde::Aggregator::mean;
    case EMDE_AGG_HMEAN: return emde::Aggregator::hmean;
  }
  emde::fail(emde::ErrorKind::invalid_argument, "unknown aggregator");
}

void give_summary(const std::string& text, char** summary) {
  if (!summary) return;
  char* buf = static_cast<char*>(std::malloc(text.size() + 1));
  if (!buf) throw std::bad_alloc();
  std::memcpy(buf, text.c_str(), text.size() + 1);
  *summary = buf;
}

}  // namespace

extern "C" {

const char* emde_version(void) { return "1.0.0"; }
const char* emde_last_error(void) { return g_last_error.c_str(); }
void emde_set_threads(int n) { emde::set_thread_count(n); }

emde_status emde_embeddings_load(const char* path, const char* modality, emde_embeddings** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new emde_embeddings{emde::load_embeddings(path, modality ? modality : "")};
  });
}

emde_status emde_embeddings_save(const emde_embeddings* emb, const char* path) {
  return guarded([&] {
    require(emb, "embeddings");
    require(path, "path");
    emde::save_embeddings(emb->table, path);
  });
}

size_t emde_embeddings_count(const emde_embeddings* emb) { return emb ? emb->table.size() : 0; }
size_t emde_embeddings_dim(const emde_embeddings* emb) { return emb ? emb->table.dim() : 0; }
void emde_embeddings_free(emde_embeddings* emb) { delete emb; }

emde_status emde_partitioning_fit(const emde_embeddings* emb, int depth, int bits, int width, uint64_t seed,
                                  emde_partitioning** out) {
  return guarded([&] {
    require(emb, "embeddings");
    require(out, "out");
    *out = new emde_partitioning{emde::fit_dlsh(emb->table, depth, bits, seed, width)};
  });
}

emde_status emde_partitioning_load(const char* path, emde_partitioning** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new emde_partitioning{emde::load_partitioning(path)};
  });
}

emde_status emde_partitioning_save(const emde_partitioning* p, const char* path) {
  return guarded([&] {
    require(p, "partitioning");
    require(path, "path");
    emde::save_partitioning(p->p, path);
  });
}

emde_status emde_partitioning_hash(const emde_partitioning* p, const double* point, size_t dim, int32_t* codes_out) {
  return guarded([&] {
    require(p, "partitioning");
    require(point, "point");
    require(codes_out, "codes_out");
    p->p.hash({point, dim}, {codes_out, static_cast<std::size_t>(p->p.depth)});
  });
}

void emde_partitioning_free(emde_partitioning* p) { delete p; }

emde_status emde_codes_assign(const emde_partitioning* p, const emde_embeddings* emb, emde_codes** out) {
  return guarded([&] {
    require(p, "partitioning");
    require(emb, "embeddings");
    require(out, "out");
    *out = new emde_codes{emde::assign_codes(p->p, emb->table)};
  });
}

emde_status emde_codes_random(const char* const* item_ids, size_t n_items, int depth, int width, uint64_t seed,
                              emde_codes** out) {
  return guarded([&] {
    require(out, "out");
    if (n_items) require(item_ids, "item_ids");
    std::vector<std::string> ids;
    ids.reserve(n_items);
    for (size_t i = 0; i < n_items; ++i) {
      require(item_ids[i], "item id");
      ids.emplace_back(item_ids[i]);
    }
    *out = new emde_codes{emde::fit_random_codes(ids, depth, width, seed)};
  });
}

emde_status emde_codes_load(const char* path, emde_codes** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new emde_codes{emde::load_codes(path)};
  });
}

emde_status emde_codes_save(const emde_codes* codes, const char* path) {
  return guarded([&] {
    require(codes, "codes");
    require(path, "path");
    emde::save_codes(codes->codes, path);
  });
}

size_t emde_codes_count(const emde_codes* codes) { return codes ? codes->codes.size() : 0; }
int emde_codes_depth(const emde_codes* codes) { return codes ? codes->codes.depth() : 0; }
int emde_codes_width(const emde_codes* codes) { return codes ? codes->codes.width() : 0; }

const char* emde_codes_item_id(const emde_codes* codes, size_t row) {
  if (!codes || row >= codes->codes.size()) return nullptr;
  return codes->codes.id(row).c_str();
}

emde_status emde_codes_row(const emde_codes* codes, const char* item_id, int32_t* codes_out) {
  return guarded([&] {
    require(codes, "codes");
    require(item_id, "item_id");
    require(codes_out, "codes_out");
    auto row = codes->codes.row(codes->codes.index_of(item_id));
    std::copy(row.begin(), row.end(), codes_out);
  });
}

void emde_codes_free(emde_codes* codes) { delete codes; }

emde_status emde_sketch_create(int depth, int width, emde_sketch** out) {
  return guarded([&] {
    require(out, "out");
    *out = new emde_sketch{emde::Sketch(depth, width)};
  });
}

emde_status emde_sketch_encode(const emde_codes* codes, const char* item_id, emde_sketch** out) {
  return guarded([&] {
    require(codes, "codes");
    require(item_id, "item_id");
    require(out, "out");
    *out = new emde_sketch{emde::encode_item(codes->codes, item_id)};
  });
}

emde_status emde_sketch_aggregate(const emde_codes* codes, const char* const* item_ids, const double* weights,
                                  size_t n_items, emde_sketch** out) {
  return guarded([&] {
    require(codes, "codes");
    require(out, "out");
    if (n_items) require(item_ids, "item_ids");
    emde::Sketch s(codes->codes.depth(), codes->codes.width());
    for (size_t i = 0; i < n_items; ++i) {
      require(item_ids[i], "item id");
      const double w = weights ? weights[i] : 1.0;
      if (!(w >= 0.0)) emde::fail(emde::ErrorKind::invalid_argument, "weights must be non-negative");
      emde::accumulate_row(s, codes->codes, codes->codes.index_of(item_ids[i]), w);
    }
    *out = new emde_sketch{std::move(s)};
  });
}

emde_status emde_sketch_add(emde_sketch* dst, const emde_sketch* src, double weight) {
  return guarded([&] {
    require(dst, "dst");
    require(src, "src");
    dst->s.add_scaled(src->s, weight);
  });
}

emde_status emde_sketch_normalize(emde_sketch* s, emde_norm norm) {
  return guarded([&] {
    require(s, "sketch");
    emde::normalize_in_place(s->s, norm == EMDE_NORM_L2 ? emde::Norm::l2 : emde::Norm::l1);
  });
}

emde_status emde_sketch_decay(emde_sketch* s, double alpha, double w, double dt) {
  return guarded([&] {
    require(s, "sketch");
    s->s = emde::decay(s->s, alpha, w, dt);
  });
}

emde_status emde_sketch_decode(const emde_sketch* s, const emde_codes* codes, emde_aggregator agg, double* scores_out,
                               size_t n_scores) {
  return guarded([&] {
    require(s, "sketch");
    require(codes, "codes");
    if (n_scores != codes->codes.size()) {
      emde::fail(emde::ErrorKind::shape, "scores buffer must hold one value per codes row");
    }
    if (n_scores) require(scores_out, "scores_out");
    auto scores = emde::decode_scores(s->s, codes->codes, to_agg(agg));
    std::copy(scores.begin(), scores.end(), scores_out);
  });
}

int emde_sketch_depth(const emde_sketch* s) { return s ? s->s.depth() : 0; }
int emde_sketch_width(const emde_sketch* s) { return s ? s->s.width() : 0; }

const double* emde_sketch_values(const emde_sketch* s, size_t* length) {
  if (!s) {
    if (length) *length = 0;
    return nullptr;
  }
  if (length) *length = s->s.size();
  return s->s.values().data();
}

emde_status emde_sketch_load(const char* path, emde_sketch** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new emde_sketch{emde::load_sketch(path)};
  });
}

emde_status emde_sketch_save(const emde_sketch* s, const char* path) {
  return guarded([&] {
    require(s, "sketch");
    require(path, "path");
    emde::save_sketch(s->s, path);
  });
}

void emde_sketch_free(emde_sketch* s) { delete s; }

emde_status emde_config_load(const char* path, emde_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto cfg = std::make_unique<emde_config>();
    cfg->path = path;
    cfg->load();  // fail early on a bad file
    *out = cfg.release();
  });
}

emde_status emde_config_set(emde_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "config");
    require(key, "key");
    require(value, "value");
    cfg->overrides.emplace_back(key, value);
    try {
      cfg->load();
    } catch (...) {
      cfg->overrides.pop_back();
      throw;
    }
  });
}

void emde_config_free(emde_config* cfg) { delete cfg; }

emde_status emde_cmd_fit_partitions(emde_config* cfg, char** summary) {
  return guarded([&] {
    require(cfg, "config");
    give_summary(emde::run_fit_partitions(cfg->load()), summary);
  });
}

emde_status emde_cmd_encode(emde_config* cfg, const char* modality, const char* const* item_ids, const double* weights,
                            size_t n_items, const char* out_path, char** summary) {
  return guarded([&] {
    require(cfg, "config");
    if (n_items) require(item_ids, "item_ids");
    std::vector<std::string> ids;
    std::vector<double> w;
    for (size_t i = 0; i < n_items; ++i) {
      require(item_ids[i], "item id");
      ids.emplace_back(item_ids[i]);
      if (weights) w.push_back(weights[i]);
    }
    give_summary(emde::run_encode(cfg->load(), modality ? modality : "", ids, w, out_path ? out_path : ""), summary);
  });
}

emde_status emde_cmd_train(emde_config* cfg, const char* resume_checkpoint, int max_epochs, char** summary) {
  return guarded([&] {
    require(cfg, "config");
    give_summary(emde::run_train(cfg->load(), resume_checkpoint ? resume_checkpoint : "", max_epochs), summary);
  });
}

emde_status emde_cmd_evaluate(emde_config* cfg, const char* checkpoint, char** summary) {
  return guarded([&] {
    require(cfg, "config");
    give_summary(emde::run_evaluate(cfg->load(), checkpoint ? checkpoint : ""), summary);
  });
}

emde_status emde_cmd_density_sweep(emde_config* cfg, char** summary) {
  return guarded([&] {
    require(cfg, "config");
    give_summary(emde::run_density_sweep(cfg->load()), summary);
  });
}

emde_status emde_cmd_ablate(emde_config* cfg, char** summary) {
  return guarded([&] {
    require(cfg, "config");
    give_summary(emde::run_ablate(cfg->load()), summary);
  });
}

emde_status emde_make_toy_dataset(const char* dir, uint64_t seed, char** summary) {
  return guarded([&] {
    require(dir, "dir");
    give_summary(emde::write_toy_dataset(dir, seed), summary);
  });
}

void emde_string_free(char* s) { std::free(s); }

}  // extern "C"
