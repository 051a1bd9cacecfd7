#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "emde/partitioner.hpp"

namespace emde {

/// Depth x width ensemble of histograms, flattened depth-major: bucket
/// (d, c) lives at index d * width + c.
class Sketch {
 public:
  Sketch() = default;
  Sketch(int depth, int width);
  Sketch(int depth, int width, std::vector<double> values);

  int depth() const { return depth_; }
  int width() const { return width_; }
  std::size_t size() const { return values_.size(); }

  double& at(int d, int c) { return values_[static_cast<std::size_t>(d) * width_ + c]; }
  double at(int d, int c) const { return values_[static_cast<std::size_t>(d) * width_ + c]; }
  std::span<double> slice(int d) { return {values_.data() + static_cast<std::size_t>(d) * width_, static_cast<std::size_t>(width_)}; }
  std::span<const double> slice(int d) const {
    return {values_.data() + static_cast<std::size_t>(d) * width_, static_cast<std::size_t>(width_)};
  }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  /// this += weight * other
  void add_scaled(const Sketch& other, double weight);
  bool same_shape(const Sketch& other) const { return depth_ == other.depth_ && width_ == other.width_; }

  friend bool operator==(const Sketch&, const Sketch&) = default;

 private:
  int depth_ = 0;
  int width_ = 0;
  std::vector<double> values_;
};

enum class Norm { l1, l2 };
enum class Aggregator { gmean, min, mean, hmean };

Aggregator parse_aggregator(const std::string& name);
std::string to_string(Aggregator a);

Sketch encode_item(const CodesMatrix& codes, const std::string& item_id);
Sketch encode_row(const CodesMatrix& codes, std::size_t row);
/// Adds weight at each of the row's buckets; the allocation-free form of
/// aggregate(encode(...)).
void accumulate_row(Sketch& s, const CodesMatrix& codes, std::size_t row, double weight);

Sketch aggregate(std::span<const Sketch> sketches, std::span<const double> weights);

/// Width-wise normalization of every depth slice. All-zero slices are left as is.
Sketch normalize(const Sketch& s, Norm norm);
void normalize_in_place(Sketch& s, Norm norm);

/// Exponential decay: every value times alpha * w^dt.
Sketch decay(const Sketch& s, double alpha, double w, double dt);
double decay_factor(double alpha, double w, double dt);

/// Reduce one item's per-depth estimates. An exact zero makes gmean and hmean
/// zero; a single value is returned unchanged by every aggregator.
double reduce_estimates(std::span<const double> values, Aggregator agg);

/// Per-item scores, aligned with codes.ids(). Unnormalized.
std::vector<double> decode_scores(const Sketch& s, const CodesMatrix& codes, Aggregator agg);

/// Dense one-hot expansion of a codes matrix (matrix B): one row per item,
/// depth * width columns, a single 1 per depth block.
class OneHotMatrix {
 public:
  explicit OneHotMatrix(const CodesMatrix& codes);

  int depth() const { return depth_; }
  int width() const { return width_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return static_cast<std::size_t>(depth_) * width_; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

 private:
  int depth_;
  int width_;
  std::size_t rows_;
  std::vector<double> data_;
};

/// Per-item, per-depth estimates by block matrix product with B; returns a
/// rows x depth matrix, row-major.
std::vector<double> batch_decode(const Sketch& s, const OneHotMatrix& b);

void write_sketch(const Sketch& s, std::ostream& out);
Sketch read_sketch(std::istream& in);
void save_sketch(const Sketch& s, const std::string& path);
Sketch load_sketch(const std::string& path);

}  // namespace emde
