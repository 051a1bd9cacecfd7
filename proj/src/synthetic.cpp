#include "emde/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "emde/common.hpp"

namespace emde {

GaussianMixture make_mixture(std::size_t dim, int components, std::uint64_t seed, double center_scale) {
  if (dim == 0 || components < 1) fail(ErrorKind::invalid_argument, "mixture needs dim >= 1 and components >= 1");
  Rng rng(seed);
  GaussianMixture m;
  m.dim = dim;
  double total = 0.0;
  for (int c = 0; c < components; ++c) {
    for (std::size_t k = 0; k < dim; ++k) m.centers.push_back(rng.normal() * center_scale);
    m.sigmas.push_back(0.5 + rng.uniform());
    m.weights.push_back(0.5 + rng.uniform());
    total += m.weights.back();
  }
  for (double& w : m.weights) w /= total;
  return m;
}

PointMatrix sample_mixture(const GaussianMixture& mixture, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  PointMatrix pts;
  pts.dim = mixture.dim;
  pts.values.reserve(n * mixture.dim);
  for (std::size_t i = 0; i < n; ++i) {
    double u = rng.uniform();
    std::size_t c = 0;
    while (c + 1 < mixture.weights.size() && u >= mixture.weights[c]) u -= mixture.weights[c++];
    for (std::size_t k = 0; k < mixture.dim; ++k) {
      pts.values.push_back(mixture.centers[c * mixture.dim + k] + mixture.sigmas[c] * rng.normal());
    }
  }
  return pts;
}

namespace {

std::string item_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "i%05zu", i);
  return buf;
}

std::size_t sample_weighted(Rng& rng, const std::vector<std::size_t>& rows, const std::vector<double>& weight) {
  double u = rng.uniform();
  for (std::size_t r : rows) {
    if (u < weight[r]) return r;
    u -= weight[r];
  }
  return rows.back();
}

}  // namespace

ClusteredCatalog make_clustered_catalog(int clusters, int items_per_cluster, std::size_t dim, double noise,
                                        std::uint64_t seed, double zipf) {
  if (clusters < 1 || items_per_cluster < 1 || dim == 0) fail(ErrorKind::invalid_argument, "bad catalog shape");
  Rng rng(seed);
  ClusteredCatalog cat;
  cat.clusters = clusters;
  cat.embeddings = EmbeddingTable("meta", dim);
  cat.members.resize(static_cast<std::size_t>(clusters));
  std::vector<double> centers(static_cast<std::size_t>(clusters) * dim);
  for (double& x : centers) x = rng.normal();
  // Item ids are shuffled so that id order carries no cluster information.
  const std::size_t n = static_cast<std::size_t>(clusters) * items_per_cluster;
  std::vector<std::size_t> names(n);
  for (std::size_t i = 0; i < n; ++i) names[i] = i;
  rng.shuffle(names);
  double norm = 0.0;
  for (int r = 0; r < items_per_cluster; ++r) norm += 1.0 / std::pow(r + 1.0, zipf);
  std::vector<double> v(dim);
  for (int c = 0; c < clusters; ++c) {
    for (int r = 0; r < items_per_cluster; ++r) {
      const std::size_t row = cat.embeddings.size();
      for (std::size_t k = 0; k < dim; ++k) v[k] = centers[static_cast<std::size_t>(c) * dim + k] + noise * rng.normal();
      cat.embeddings.add(item_name(names[row]), v);
      cat.cluster_of.push_back(c);
      cat.members[static_cast<std::size_t>(c)].push_back(row);
      cat.popularity.push_back(1.0 / std::pow(r + 1.0, zipf) / norm);
    }
  }
  return cat;
}

InteractionLog make_sessions(const ClusteredCatalog& catalog, const SessionSpec& spec, std::uint64_t seed) {
  if (spec.min_length < 2 || spec.max_length < spec.min_length) fail(ErrorKind::invalid_argument, "bad session lengths");
  Rng rng(seed);
  const auto clusters = static_cast<std::uint64_t>(catalog.clusters);
  // A random single cycle over the clusters: next[c] != c whenever clusters > 1.
  std::vector<int> order(catalog.clusters), next(catalog.clusters);
  for (int c = 0; c < catalog.clusters; ++c) order[c] = c;
  rng.shuffle(order);
  for (int i = 0; i < catalog.clusters; ++i) next[order[i]] = order[(i + 1) % catalog.clusters];

  InteractionLog log;
  double clock = 0.0;
  for (std::size_t s = 0; s < spec.sessions; ++s) {
    const std::string sid = "s" + std::to_string(s);
    const int len = spec.min_length + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.max_length - spec.min_length + 1)));
    int cluster = static_cast<int>(rng.below(clusters));
    std::size_t prev = catalog.embeddings.size();
    for (int t = 0; t < len; ++t) {
      if (t > 0) {
        if (rng.uniform() < spec.jump_probability) {
          cluster = static_cast<int>(rng.below(clusters));
        } else if (spec.transition == Transition::shifted_cluster) {
          cluster = next[cluster];
        }
      }
      const auto& rows = catalog.members[static_cast<std::size_t>(cluster)];
      std::size_t row = sample_weighted(rng, rows, catalog.popularity);
      if (row == prev && rows.size() > 1) row = sample_weighted(rng, rows, catalog.popularity);
      prev = row;
      log.records.push_back({sid, catalog.embeddings.id(row), clock, "view", 1.0});
      clock += 1.0;
    }
  }
  return log;
}

InteractionLog make_topk_users(const ClusteredCatalog& catalog, std::size_t users, int min_liked, int max_liked,
                               int disliked, std::uint64_t seed) {
  if (min_liked < 2 || max_liked < min_liked) fail(ErrorKind::invalid_argument, "bad liked-item counts");
  Rng rng(seed);
  const auto clusters = static_cast<std::uint64_t>(catalog.clusters);
  InteractionLog log;
  double clock = 0.0;
  for (std::size_t u = 0; u < users; ++u) {
    const std::string uid = "u" + std::to_string(u);
    const int favourite = static_cast<int>(rng.below(clusters));
    int other = static_cast<int>(rng.below(clusters));
    if (clusters > 1 && other == favourite) other = (favourite + 1) % catalog.clusters;
    const int n_like = min_liked + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_liked - min_liked + 1)));
    const auto& fav_rows = catalog.members[static_cast<std::size_t>(favourite)];
    std::set<std::size_t> chosen;
    for (int i = 0; i < n_like * 4 && static_cast<int>(chosen.size()) < n_like && chosen.size() < fav_rows.size(); ++i) {
      chosen.insert(sample_weighted(rng, fav_rows, catalog.popularity));
    }
    for (std::size_t row : chosen) log.records.push_back({uid, catalog.embeddings.id(row), clock++, "like", 1.0});
    const auto& bad_rows = catalog.members[static_cast<std::size_t>(other)];
    std::set<std::size_t> bad;
    for (int i = 0; i < disliked; ++i) bad.insert(sample_weighted(rng, bad_rows, catalog.popularity));
    for (std::size_t row : bad) {
      if (!chosen.count(row)) log.records.push_back({uid, catalog.embeddings.id(row), clock++, "dislike", 1.0});
    }
  }
  return log;
}

}  // namespace emde
