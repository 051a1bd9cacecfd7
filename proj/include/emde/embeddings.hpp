#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace emde {

/// Item vectors for one modality, stored row-major. Immutable once built.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::string modality, std::size_t dim);

  /// Appends a row. Throws on duplicate id, wrong length or non-finite values.
  void add(const std::string& item_id, std::span<const double> vec);

  const std::string& modality() const { return modality_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(std::size_t row) const { return ids_[row]; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  /// Row index for an id, or -1 when absent.
  long find(const std::string& item_id) const;
  bool contains(const std::string& item_id) const { return find(item_id) >= 0; }

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
    return a.modality_ == b.modality_ && a.dim_ == b.dim_ && a.ids_ == b.ids_ && a.data_ == b.data_;
  }

 private:
  std::string modality_;
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Parses `<item_id> <f1> ... <fd>` lines. Blank lines and lines starting with
/// '#' are skipped. Errors carry the 1-based line number.
EmbeddingTable load_embeddings(const std::string& path, const std::string& modality);
EmbeddingTable parse_embeddings(std::istream& in, const std::string& modality);
void save_embeddings(const EmbeddingTable& table, const std::string& path);

/// Test stand-in for an external graph embedder: seeded random unit vectors
/// smoothed by repeated L2-normalized neighbourhood means, where two items are
/// neighbours when they share a context (an item is its own neighbour).
EmbeddingTable synth_propagation_embedder(
    const std::vector<std::pair<std::string, std::string>>& interactions, std::size_t dim,
    int iterations, std::uint64_t seed, const std::string& modality = "propagation");

}  // namespace emde
