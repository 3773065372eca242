#include "judgekit/embedding.hpp"

#include <cmath>
#include <unordered_set>

#include "judgekit/error.hpp"
#include "judgekit/serialization.hpp"

namespace judgekit {

EmbeddingSet EmbeddingSet::from_raw(std::vector<std::string> ids, std::vector<std::vector<double>> vectors) {
  if (ids.size() != vectors.size()) {
    throw SizeMismatch("embedding ids (" + std::to_string(ids.size()) + ") and vectors (" +
                       std::to_string(vectors.size()) + ") differ in length");
  }
  EmbeddingSet out;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    auto& v = vectors[i];
    if (i == 0) {
      out.dim_ = v.size();
    } else if (v.size() != out.dim_) {
      throw DimensionMismatch("embedding '" + ids[i] + "' has dimension " + std::to_string(v.size()) +
                              ", expected " + std::to_string(out.dim_));
    }
    if (v.empty()) {
      throw DomainError("embedding '" + ids[i] + "' is empty");
    }
    double sq = 0.0;
    for (double x : v) {
      sq += x * x;
    }
    const double norm = std::sqrt(sq);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw DomainError("embedding '" + ids[i] + "' is a zero or non-finite vector");
    }
    for (double& x : v) {
      x /= norm;
    }
    if (!seen.insert(ids[i]).second) {
      throw DomainError("duplicate embedding id '" + ids[i] + "'");
    }
  }
  out.ids_ = std::move(ids);
  out.vectors_ = std::move(vectors);
  return out;
}

EmbeddingSet EmbeddingSet::load_jsonl(const std::filesystem::path& path) {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> vectors;
  for_each_jsonl(path, [&](std::size_t, const Json& j) {
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) {
      throw ParseError(0, "embedding record needs a string 'id'");
    }
    if (!j.contains("vector") || !j["vector"].is_array()) {
      throw ParseError(0, "embedding record needs a numeric array 'vector'");
    }
    std::vector<double> v;
    for (const auto& x : j["vector"]) {
      if (!x.is_number()) {
        throw ParseError(0, "embedding vector entries must be numbers");
      }
      v.push_back(x.get<double>());
    }
    ids.push_back(j["id"].get<std::string>());
    vectors.push_back(std::move(v));
  });
  return from_raw(std::move(ids), std::move(vectors));
}

EmbeddingSet EmbeddingSet::select(std::span<const std::size_t> indices) const {
  EmbeddingSet out;
  out.dim_ = dim_;
  for (std::size_t i : indices) {
    out.ids_.push_back(ids_.at(i));
    out.vectors_.push_back(vectors_.at(i));
  }
  return out;
}

std::size_t EmbeddingSet::find(const std::string& id) const {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i] == id) {
      return i;
    }
  }
  return ids_.size();
}

double cosine_unit(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    dot += a[i] * b[i];
  }
  return dot;
}

}  // namespace judgekit
