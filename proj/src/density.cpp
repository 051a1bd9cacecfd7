#include "emde/density.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "emde/common.hpp"

namespace emde {

PointMatrix to_points(const EmbeddingTable& table) {
  PointMatrix m;
  m.dim = table.dim();
  m.values.reserve(table.size() * table.dim());
  for (std::size_t i = 0; i < table.size(); ++i) m.push(table.row(i));
  return m;
}

Sketch density_sketch(const Partitioning& p, const PointMatrix& data, std::span<const double> weights) {
  if (data.dim != p.dim) fail(ErrorKind::shape, "data dimension does not match partitioning");
  if (!weights.empty() && weights.size() != data.size()) fail(ErrorKind::shape, "one weight per data point required");
  Sketch s(p.depth, p.width);
  std::vector<std::int32_t> codes(p.depth);
  for (std::size_t i = 0; i < data.size(); ++i) {
    p.hash(data.row(i), codes);
    const double w = weights.empty() ? 1.0 : weights[i];
    for (int d = 0; d < p.depth; ++d) s.at(d, codes[d]) += w;
  }
  return s;
}

std::vector<double> query_density(const Partitioning& p, const Sketch& normalized, const PointMatrix& queries,
                                  Aggregator agg) {
  if (queries.dim != p.dim) fail(ErrorKind::shape, "query dimension does not match partitioning");
  std::vector<double> out(queries.size());
  parallel_for(queries.size(), [&](std::size_t q) {
    std::vector<std::int32_t> codes(p.depth);
    std::vector<double> gathered(p.depth);
    p.hash(queries.row(q), codes);
    for (int d = 0; d < p.depth; ++d) gathered[d] = normalized.at(d, codes[d]);
    out[q] = reduce_estimates(gathered, agg);
  });
  return out;
}

DensityEstimate emde_density(const Partitioning& p, const PointMatrix& data, const PointMatrix& queries,
                             Aggregator agg) {
  Sketch s = density_sketch(p, data);
  normalize_in_place(s, Norm::l1);
  return {queries, query_density(p, s, queries, agg)};
}

DensityEstimate emde_density(const Partitioning& p, const EmbeddingTable& data, const PointMatrix& queries,
                             Aggregator agg) {
  return emde_density(p, to_points(data), queries, agg);
}

DensityEstimate brute_force_kde(const PointMatrix& data, const PointMatrix& queries, double bandwidth, Kernel) {
  if (!(bandwidth > 0.0)) fail(ErrorKind::invalid_argument, "bandwidth must be positive");
  if (data.dim != queries.dim) fail(ErrorKind::shape, "data and query dimensions differ");
  std::vector<double> out(queries.size());
  parallel_for(queries.size(), [&](std::size_t q) {
    auto qr = queries.row(q);
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      auto x = data.row(i);
      double dist = 0.0;
      for (std::size_t k = 0; k < data.dim; ++k) dist += std::abs(qr[k] - x[k]);
      total += std::exp(-dist / bandwidth);
    }
    out[q] = total;
  });
  return {queries, std::move(out)};
}

double median_pairwise_l1(const PointMatrix& data, std::size_t max_sample, std::uint64_t seed) {
  if (data.size() < 2) fail(ErrorKind::invalid_argument, "need at least two points");
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  if (idx.size() > max_sample) {
    Rng rng(seed);
    rng.shuffle(idx);
    idx.resize(max_sample);
  }
  std::vector<double> dists;
  dists.reserve(idx.size() * (idx.size() - 1) / 2);
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      auto x = data.row(idx[a]);
      auto y = data.row(idx[b]);
      double d = 0.0;
      for (std::size_t k = 0; k < data.dim; ++k) d += std::abs(x[k] - y[k]);
      dists.push_back(d);
    }
  }
  auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  return *mid;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::shape, "pearson: length mismatch");
  if (a.size() < 2) fail(ErrorKind::invalid_argument, "pearson: need at least two values");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) fail(ErrorKind::numeric, "pearson: zero variance");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<SweepRow> nk_sweep(const PointMatrix& data, const PointMatrix& queries,
                               std::span<const double> oracle, std::span<const int> depths,
                               std::span<const int> bits, std::span<const std::uint64_t> seeds,
                               Aggregator agg) {
  if (depths.empty() || bits.empty() || seeds.empty()) fail(ErrorKind::invalid_argument, "empty sweep grid");
  if (oracle.size() != queries.size()) fail(ErrorKind::shape, "one oracle value per query required");
  EmbeddingTable table("sweep", data.dim);
  for (std::size_t i = 0; i < data.size(); ++i) table.add(std::to_string(i), data.row(i));

  std::vector<SweepRow> rows;
  for (int n : depths) {
    for (int k : bits) {
      for (std::uint64_t seed : seeds) rows.push_back({n, k, seed, 0.0});
    }
  }
  parallel_for(rows.size(), [&](std::size_t r) {
    auto& row = rows[r];
    Partitioning p = fit_dlsh(table, row.depth, row.bits, row.seed);
    auto est = emde_density(p, data, queries, agg).estimates;
    try {
      row.pearson = pearson(est, oracle);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::numeric) throw;
      row.pearson = 0.0;
    }
  });
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write '" + path + "'");
  out << "N,K,seed,pearson\n";
  for (const auto& r : rows) out << r.depth << ',' << r.bits << ',' << r.seed << ',' << format_double(r.pearson) << '\n';
}

}  // namespace emde
