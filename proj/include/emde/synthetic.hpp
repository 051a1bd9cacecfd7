#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "emde/density.hpp"
#include "emde/embeddings.hpp"
#include "emde/recsys.hpp"

namespace emde {

/// Isotropic Gaussian mixture with random centers, scales and weights.
struct GaussianMixture {
  std::size_t dim = 0;
  std::vector<double> weights;
  std::vector<double> centers;  // components x dim
  std::vector<double> sigmas;
};

GaussianMixture make_mixture(std::size_t dim, int components, std::uint64_t seed, double center_scale = 3.0);
PointMatrix sample_mixture(const GaussianMixture& mixture, std::size_t n, std::uint64_t seed);

/// Items grouped in well-separated embedding clusters, with a Zipf
/// popularity profile inside each cluster.
struct ClusteredCatalog {
  EmbeddingTable embeddings;
  int clusters = 0;
  std::vector<int> cluster_of;                     // per item row
  std::vector<std::vector<std::size_t>> members;   // per cluster, most popular first
  std::vector<double> popularity;                  // per item row, sums to 1 within a cluster
};

ClusteredCatalog make_clustered_catalog(int clusters, int items_per_cluster, std::size_t dim, double noise,
                                        std::uint64_t seed, double zipf = 1.0);

enum class Transition {
  same_cluster,     // the next item stays in the current item's cluster
  shifted_cluster,  // the next item comes from a fixed other cluster
};

struct SessionSpec {
  std::size_t sessions = 1000;
  int min_length = 3;
  int max_length = 8;
  Transition transition = Transition::same_cluster;
  double jump_probability = 0.1;
};

InteractionLog make_sessions(const ClusteredCatalog& catalog, const SessionSpec& spec, std::uint64_t seed);

/// Users with liked items from a preferred cluster and disliked items from
/// another; event types "like" and "dislike".
InteractionLog make_topk_users(const ClusteredCatalog& catalog, std::size_t users, int min_liked, int max_liked,
                               int disliked, std::uint64_t seed);

}  // namespace emde
