#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "emde/embeddings.hpp"
#include "emde/partitioner.hpp"
#include "emde/sketch.hpp"

namespace emde {

/// Row-major set of points sharing one dimension.
struct PointMatrix {
  std::size_t dim = 0;
  std::vector<double> values;

  std::size_t size() const { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
  void push(std::span<const double> p) { values.insert(values.end(), p.begin(), p.end()); }
};

PointMatrix to_points(const EmbeddingTable& table);

struct DensityEstimate {
  PointMatrix queries;
  std::vector<double> estimates;
};

/// Unnormalized count sketch of the data under p. `weights` may be empty
/// (unit weights) or hold one non-negative weight per row.
Sketch density_sketch(const Partitioning& p, const PointMatrix& data, std::span<const double> weights = {});

/// Pure EMDE density: aggregate all data with unit weight, L1-normalize each
/// depth slice, then hash and decode each query.
DensityEstimate emde_density(const Partitioning& p, const PointMatrix& data, const PointMatrix& queries,
                             Aggregator agg = Aggregator::gmean);
DensityEstimate emde_density(const Partitioning& p, const EmbeddingTable& data, const PointMatrix& queries,
                             Aggregator agg = Aggregator::gmean);

/// Decode queries against an already normalized sketch.
std::vector<double> query_density(const Partitioning& p, const Sketch& normalized, const PointMatrix& queries,
                                  Aggregator agg);

enum class Kernel { laplacian };

/// Exact kernel sum: sum_i exp(-|q - x_i|_1 / bandwidth).
DensityEstimate brute_force_kde(const PointMatrix& data, const PointMatrix& queries, double bandwidth,
                                Kernel kernel = Kernel::laplacian);

/// Median pairwise L1 distance over a seeded subsample of at most
/// `max_sample` points.
double median_pairwise_l1(const PointMatrix& data, std::size_t max_sample, std::uint64_t seed);

/// Sample Pearson correlation. Throws numeric on zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

struct SweepRow {
  int depth;
  int bits;
  std::uint64_t seed;
  double pearson;
};

/// Correlation of EMDE estimates with a fixed oracle for every (N, K, seed).
/// A constant estimate (zero variance) is scored 0.
std::vector<SweepRow> nk_sweep(const PointMatrix& data, const PointMatrix& queries,
                               std::span<const double> oracle, std::span<const int> depths,
                               std::span<const int> bits, std::span<const std::uint64_t> seeds,
                               Aggregator agg = Aggregator::gmean);

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

}  // namespace emde
