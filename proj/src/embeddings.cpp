#include "emde/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "emde/common.hpp"

namespace emde {

EmbeddingTable::EmbeddingTable(std::string modality, std::size_t dim)
    : modality_(std::move(modality)), dim_(dim) {
  if (dim_ == 0) fail(ErrorKind::invalid_argument, "embedding dimension must be positive");
}

void EmbeddingTable::add(const std::string& item_id, std::span<const double> vec) {
  if (vec.size() != dim_) {
    fail(ErrorKind::shape, "item '" + item_id + "' has dimension " + std::to_string(vec.size()) +
                               ", expected " + std::to_string(dim_));
  }
  for (double x : vec) {
    if (!std::isfinite(x)) fail(ErrorKind::numeric, "item '" + item_id + "' has a non-finite value");
  }
  if (index_.count(item_id)) fail(ErrorKind::format, "duplicate item_id '" + item_id + "'");
  index_.emplace(item_id, ids_.size());
  ids_.push_back(item_id);
  data_.insert(data_.end(), vec.begin(), vec.end());
}

long EmbeddingTable::find(const std::string& item_id) const {
  auto it = index_.find(item_id);
  return it == index_.end() ? -1 : static_cast<long>(it->second);
}

EmbeddingTable parse_embeddings(std::istream& in, const std::string& modality) {
  EmbeddingTable table;
  bool started = false;
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> vec;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = split_ws(line);
    if (fields.empty() || fields[0].front() == '#') continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (fields.size() < 2) fail(ErrorKind::format, where + "expected an id followed by values");
    vec.clear();
    try {
      for (std::size_t i = 1; i < fields.size(); ++i) vec.push_back(parse_double(fields[i]));
      if (!started) {
        table = EmbeddingTable(modality, vec.size());
        started = true;
      }
      table.add(std::string(fields[0]), vec);
    } catch (const Error& e) {
      fail(e.kind(), where + e.what());
    }
  }
  if (!started) fail(ErrorKind::format, "embedding table is empty");
  return table;
}

EmbeddingTable load_embeddings(const std::string& path, const std::string& modality) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open embedding file '" + path + "'");
  try {
    return parse_embeddings(in, modality);
  } catch (const Error& e) {
    fail(e.kind(), path + ": " + e.what());
  }
}

void save_embeddings(const EmbeddingTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write embedding file '" + path + "'");
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.id(i);
    for (double x : table.row(i)) out << ' ' << format_double(x);
    out << '\n';
  }
  if (!out) fail(ErrorKind::io, "write failed for '" + path + "'");
}

namespace {

void normalize_l2(std::span<double> v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& x : v) x /= norm;
  }
}

}  // namespace

EmbeddingTable synth_propagation_embedder(
    const std::vector<std::pair<std::string, std::string>>& interactions, std::size_t dim,
    int iterations, std::uint64_t seed, const std::string& modality) {
  if (interactions.empty()) fail(ErrorKind::invalid_argument, "no interactions to embed");
  if (dim == 0) fail(ErrorKind::invalid_argument, "dim must be >= 1");
  if (iterations < 0) fail(ErrorKind::invalid_argument, "iterations must be >= 0");

  // Items in first-appearance order; contexts as item index sets.
  std::vector<std::string> items;
  std::map<std::string, std::size_t> item_index;
  std::map<std::string, std::set<std::size_t>> contexts;
  for (const auto& [context, item] : interactions) {
    auto [it, inserted] = item_index.emplace(item, items.size());
    if (inserted) items.push_back(item);
    contexts[context].insert(it->second);
  }
  const std::size_t n = items.size();

  std::vector<std::vector<std::size_t>> neighbours(n);
  {
    std::vector<std::set<std::size_t>> sets(n);
    for (const auto& [context, members] : contexts) {
      for (std::size_t a : members) sets[a].insert(members.begin(), members.end());
    }
    for (std::size_t i = 0; i < n; ++i) neighbours[i].assign(sets[i].begin(), sets[i].end());
  }

  // Each item's initial vector depends only on (seed, item_id).
  std::vector<double> cur(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, hash_string(items[i])));
    std::span<double> v(cur.data() + i * dim, dim);
    double norm = 0.0;
    do {
      for (double& x : v) x = rng.normal();
      norm = 0.0;
      for (double x : v) norm += x * x;
    } while (norm == 0.0);
    normalize_l2(v);
  }

  std::vector<double> next(n * dim);
  for (int it = 0; it < iterations; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      std::span<double> out(next.data() + i * dim, dim);
      for (std::size_t j : neighbours[i]) {
        for (std::size_t k = 0; k < dim; ++k) out[k] += cur[j * dim + k];
      }
      for (double& x : out) x /= static_cast<double>(neighbours[i].size());
      normalize_l2(out);
    }
    cur.swap(next);
  }

  EmbeddingTable table(modality, dim);
  for (std::size_t i = 0; i < n; ++i) table.add(items[i], {cur.data() + i * dim, dim});
  return table;
}

}  // namespace emde
