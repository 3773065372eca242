#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace judgekit {

/// Id-aligned set of L2-normalized vectors of one common dimension.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;

  /// Normalizes every vector. Throws DimensionMismatch on ragged input,
  /// SizeMismatch when ids and vectors differ in length, and DomainError on
  /// zero or non-finite vectors and duplicate ids.
  static EmbeddingSet from_raw(std::vector<std::string> ids, std::vector<std::vector<double>> vectors);

  /// Reads {"id","vector":[...]} JSONL.
  static EmbeddingSet load_jsonl(const std::filesystem::path& path);

  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  std::size_t dimension() const noexcept { return dim_; }

  const std::string& id(std::size_t i) const { return ids_.at(i); }
  std::span<const double> vector(std::size_t i) const { return vectors_.at(i); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  /// Subset in the given index order.
  EmbeddingSet select(std::span<const std::size_t> indices) const;

  /// Index of `id`, or size() when absent.
  std::size_t find(const std::string& id) const;

 private:
  std::vector<std::string> ids_;
  std::vector<std::vector<double>> vectors_;
  std::size_t dim_ = 0;
};

/// Dot product of two unit vectors, i.e. their cosine similarity.
double cosine_unit(std::span<const double> a, std::span<const double> b);

}  // namespace judgekit
