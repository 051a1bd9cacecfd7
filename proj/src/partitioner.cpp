#include "emde/partitioner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "emde/common.hpp"

namespace emde {

namespace {

constexpr const char* kPartitioningMagic = "emde-partitioning";
constexpr const char* kCodesMagic = "# emde-codes";
constexpr int kFormatVersion = 1;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

void Partitioning::hash(std::span<const double> point, std::span<std::int32_t> codes_out) const {
  if (point.size() != dim) {
    fail(ErrorKind::shape, "point dimension " + std::to_string(point.size()) +
                               " does not match partitioning dimension " + std::to_string(dim));
  }
  for (int d = 0; d < depth; ++d) {
    std::uint64_t code = 0;
    for (int i = 0; i < bits; ++i) {
      // Ties fall on the zero side.
      if (dot(point, direction(d, i)) - bias(d, i) > 0.0) code |= std::uint64_t{1} << i;
    }
    codes_out[d] = static_cast<std::int32_t>(code % static_cast<std::uint64_t>(width));
  }
}

CodesMatrix::CodesMatrix(std::vector<std::string> ids, int depth, int width,
                         std::vector<std::int32_t> codes)
    : ids_(std::move(ids)), depth_(depth), width_(width), codes_(std::move(codes)) {
  if (depth_ < 1 || width_ < 1) fail(ErrorKind::invalid_argument, "codes depth and width must be >= 1");
  if (codes_.size() != ids_.size() * static_cast<std::size_t>(depth_)) {
    fail(ErrorKind::shape, "codes matrix has wrong number of entries");
  }
  for (std::int32_t c : codes_) {
    if (c < 0 || c >= width_) fail(ErrorKind::format, "code out of range [0, width)");
  }
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) fail(ErrorKind::invalid_argument, "duplicate item_id '" + ids_[i] + "'");
  }
}

long CodesMatrix::find(const std::string& item_id) const {
  auto it = index_.find(item_id);
  return it == index_.end() ? -1 : static_cast<long>(it->second);
}

std::size_t CodesMatrix::index_of(const std::string& item_id) const {
  long i = find(item_id);
  if (i < 0) fail(ErrorKind::not_found, "unknown item_id '" + item_id + "'");
  return static_cast<std::size_t>(i);
}

CodesMatrix CodesMatrix::subset(const std::vector<std::string>& ids) const {
  std::vector<std::int32_t> codes;
  codes.reserve(ids.size() * depth_);
  for (const auto& id : ids) {
    auto r = row(index_of(id));
    codes.insert(codes.end(), r.begin(), r.end());
  }
  return CodesMatrix(ids, depth_, width_, std::move(codes));
}

double empirical_quantile(std::span<const double> sorted, double u) {
  if (sorted.empty()) fail(ErrorKind::invalid_argument, "quantile of empty sample");
  if (sorted.size() == 1) return sorted[0];
  const double h = u * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

Partitioning fit_dlsh(const EmbeddingTable& table, int depth, int bits, std::uint64_t seed, int width) {
  if (depth < 1) fail(ErrorKind::invalid_argument, "depth N must be >= 1");
  if (bits < 1 || bits > 30) fail(ErrorKind::invalid_argument, "bits K must be in [1, 30]");
  if (table.size() < 2) fail(ErrorKind::invalid_argument, "DLSH needs at least 2 items to place quantile biases");

  Partitioning p;
  p.depth = depth;
  p.bits = bits;
  p.width = width > 0 ? width : (1 << bits);
  p.dim = table.dim();
  p.seed = seed;
  p.modality = table.modality();
  p.directions.resize(static_cast<std::size_t>(depth) * bits * p.dim);
  p.biases.resize(static_cast<std::size_t>(depth) * bits);

  Rng rng(seed);
  std::vector<double> projections(table.size());
  for (int d = 0; d < depth; ++d) {
    for (int i = 0; i < bits; ++i) {
      const std::size_t h = static_cast<std::size_t>(d) * bits + i;
      std::span<double> r(p.directions.data() + h * p.dim, p.dim);
      double norm = 0.0;
      do {
        for (double& x : r) x = rng.normal();
        norm = std::sqrt(dot(r, r));
      } while (norm == 0.0);
      for (double& x : r) x /= norm;

      for (std::size_t row = 0; row < table.size(); ++row) projections[row] = dot(table.row(row), r);
      std::sort(projections.begin(), projections.end());
      const double u = std::clamp(rng.uniform(), kQuantileLow, kQuantileHigh);
      p.biases[h] = empirical_quantile(projections, u);
    }
  }
  return p;
}

CodesMatrix assign_codes(const Partitioning& p, const EmbeddingTable& table) {
  if (p.dim != table.dim()) {
    fail(ErrorKind::shape, "partitioning dimension " + std::to_string(p.dim) +
                               " != embedding dimension " + std::to_string(table.dim()));
  }
  std::vector<std::int32_t> codes(table.size() * static_cast<std::size_t>(p.depth));
  parallel_for(table.size(), [&](std::size_t i) {
    p.hash(table.row(i), {codes.data() + i * p.depth, static_cast<std::size_t>(p.depth)});
  });
  return CodesMatrix(table.ids(), p.depth, p.width, std::move(codes));
}

CodesMatrix fit_random_codes(const std::vector<std::string>& item_ids, int depth, int width,
                             std::uint64_t seed) {
  if (depth < 1) fail(ErrorKind::invalid_argument, "depth N must be >= 1");
  if (width < 1) fail(ErrorKind::invalid_argument, "width W must be >= 1");
  std::vector<std::int32_t> codes;
  codes.reserve(item_ids.size() * depth);
  for (const auto& id : item_ids) {
    const std::uint64_t item_key = derive_seed(seed, hash_string(id));
    for (int d = 0; d < depth; ++d) {
      Rng rng(derive_seed(item_key, static_cast<std::uint64_t>(d)));
      codes.push_back(static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(width))));
    }
  }
  // The constructor rejects duplicate ids.
  return CodesMatrix(item_ids, depth, width, std::move(codes));
}

void write_partitioning(const Partitioning& p, std::ostream& out) {
  out << kPartitioningMagic << ' ' << kFormatVersion << '\n';
  out << "modality " << (p.modality.empty() ? "-" : p.modality) << '\n';
  out << "depth " << p.depth << "\nbits " << p.bits << "\nwidth " << p.width << "\ndim " << p.dim
      << "\nseed " << p.seed << '\n';
  // One hash per line: bias, then direction components.
  for (int d = 0; d < p.depth; ++d) {
    for (int i = 0; i < p.bits; ++i) {
      out << format_double(p.bias(d, i));
      for (double x : p.direction(d, i)) out << ' ' << format_double(x);
      out << '\n';
    }
  }
}

Partitioning read_partitioning(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kPartitioningMagic) {
    fail(ErrorKind::format, "not an emde partitioning file");
  }
  if (version != kFormatVersion) {
    fail(ErrorKind::format, "unsupported partitioning format version " + std::to_string(version));
  }
  Partitioning p;
  auto expect = [&](const char* key, auto& value) {
    std::string k;
    if (!(in >> k >> value) || k != key) fail(ErrorKind::format, std::string("partitioning: expected '") + key + "'");
  };
  expect("modality", p.modality);
  if (p.modality == "-") p.modality.clear();
  expect("depth", p.depth);
  expect("bits", p.bits);
  expect("width", p.width);
  expect("dim", p.dim);
  expect("seed", p.seed);
  if (p.depth < 1 || p.bits < 1 || p.width < 1 || p.dim < 1) fail(ErrorKind::format, "partitioning: bad shape");
  const std::size_t hashes = static_cast<std::size_t>(p.depth) * p.bits;
  p.biases.resize(hashes);
  p.directions.resize(hashes * p.dim);
  std::string tok;
  for (std::size_t h = 0; h < hashes; ++h) {
    if (!(in >> tok)) fail(ErrorKind::format, "partitioning: truncated");
    p.biases[h] = parse_double(tok);
    for (std::size_t k = 0; k < p.dim; ++k) {
      if (!(in >> tok)) fail(ErrorKind::format, "partitioning: truncated");
      p.directions[h * p.dim + k] = parse_double(tok);
    }
  }
  return p;
}

void save_partitioning(const Partitioning& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write '" + path + "'");
  write_partitioning(p, out);
}

Partitioning load_partitioning(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
  return read_partitioning(in);
}

void write_codes(const CodesMatrix& codes, std::ostream& out) {
  out << kCodesMagic << ' ' << kFormatVersion << " depth " << codes.depth() << " width " << codes.width()
      << '\n';
  for (std::size_t i = 0; i < codes.size(); ++i) {
    out << codes.id(i);
    for (std::int32_t c : codes.row(i)) out << ' ' << c;
    out << '\n';
  }
}

CodesMatrix read_codes(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::format, "codes file is empty");
  int version = 0, depth = 0, width = 0;
  {
    std::istringstream header(line.substr(std::min(line.size(), std::string(kCodesMagic).size())));
    std::string k1, k2;
    if (line.rfind(kCodesMagic, 0) != 0 || !(header >> version >> k1 >> depth >> k2 >> width) ||
        k1 != "depth" || k2 != "width") {
      fail(ErrorKind::format, "not an emde codes file");
    }
  }
  if (version != kFormatVersion) fail(ErrorKind::format, "unsupported codes format version");
  std::vector<std::string> ids;
  std::vector<std::int32_t> codes;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (fields.size() != static_cast<std::size_t>(depth) + 1) {
      fail(ErrorKind::format, "codes line " + std::to_string(lineno) + ": expected " +
                                  std::to_string(depth) + " codes");
    }
    ids.emplace_back(fields[0]);
    for (std::size_t i = 1; i < fields.size(); ++i) codes.push_back(static_cast<std::int32_t>(parse_int(fields[i])));
  }
  return CodesMatrix(std::move(ids), depth, width, std::move(codes));
}

void save_codes(const CodesMatrix& codes, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write '" + path + "'");
  write_codes(codes, out);
}

CodesMatrix load_codes(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
  return read_codes(in);
}

}  // namespace emde
