#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "emde/embeddings.hpp"

namespace emde {

/// N independent K-bit hyperplane partitionings of one embedding manifold.
/// Hash (d, i) has a unit direction and a bias; the K sign bits of a point at
/// depth d form an integer code which is reduced modulo the sketch width.
struct Partitioning {
  int depth = 0;
  int bits = 0;
  int width = 0;
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  std::string modality;
  std::vector<double> directions;  // (depth * bits) x dim, row-major
  std::vector<double> biases;      // depth * bits

  std::span<const double> direction(int d, int i) const {
    return {directions.data() + (static_cast<std::size_t>(d) * bits + i) * dim, dim};
  }
  double bias(int d, int i) const { return biases[static_cast<std::size_t>(d) * bits + i]; }

  /// Region codes of an arbitrary point, one per depth level. Items and
  /// density queries both go through here.
  void hash(std::span<const double> point, std::span<std::int32_t> codes_out) const;

  friend bool operator==(const Partitioning&, const Partitioning&) = default;
};

/// Per-item region indices (matrix M): one row of `depth` codes in [0, width)
/// per item, rows ordered like `ids`.
class CodesMatrix {
 public:
  CodesMatrix() = default;
  CodesMatrix(std::vector<std::string> ids, int depth, int width, std::vector<std::int32_t> codes);

  int depth() const { return depth_; }
  int width() const { return width_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(std::size_t row) const { return ids_[row]; }
  std::span<const std::int32_t> row(std::size_t i) const {
    return {codes_.data() + i * static_cast<std::size_t>(depth_), static_cast<std::size_t>(depth_)};
  }
  long find(const std::string& item_id) const;
  /// Throws not_found for unknown ids.
  std::size_t index_of(const std::string& item_id) const;

  /// Rows restricted to `ids`, in that order. Unknown ids throw.
  CodesMatrix subset(const std::vector<std::string>& ids) const;

  friend bool operator==(const CodesMatrix& a, const CodesMatrix& b) {
    return a.depth_ == b.depth_ && a.width_ == b.width_ && a.ids_ == b.ids_ && a.codes_ == b.codes_;
  }

 private:
  std::vector<std::string> ids_;
  int depth_ = 0;
  int width_ = 0;
  std::vector<std::int32_t> codes_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Linear-interpolation empirical quantile of an ascending sample.
double empirical_quantile(std::span<const double> sorted, double u);

inline constexpr double kQuantileLow = 0.05;
inline constexpr double kQuantileHigh = 0.95;

/// Density-dependent LSH fit. `width` <= 0 selects 2^bits.
Partitioning fit_dlsh(const EmbeddingTable& table, int depth, int bits, std::uint64_t seed,
                      int width = 0);

CodesMatrix assign_codes(const Partitioning& p, const EmbeddingTable& table);

/// Geometry-blind codes: each entry is a hash of (seed, item_id, depth) mod
/// width, so a row never depends on the other items or their order.
CodesMatrix fit_random_codes(const std::vector<std::string>& item_ids, int depth, int width,
                             std::uint64_t seed);

void save_partitioning(const Partitioning& p, const std::string& path);
Partitioning load_partitioning(const std::string& path);
void write_partitioning(const Partitioning& p, std::ostream& out);
Partitioning read_partitioning(std::istream& in);

void save_codes(const CodesMatrix& codes, const std::string& path);
CodesMatrix load_codes(const std::string& path);
void write_codes(const CodesMatrix& codes, std::ostream& out);
CodesMatrix read_codes(std::istream& in);

}  // namespace emde
