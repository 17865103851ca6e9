#include "calm/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "calm/error.hpp"

namespace calm {

namespace {

constexpr double kZeroNorm = 1e-12;
constexpr double kDomainSlack = 1e-9;

}  // namespace

EmbeddingSet::EmbeddingSet(Matrix vectors, std::vector<ClassId> labels)
    : vectors_(std::move(vectors)), labels_(std::move(labels)) {
  if (vectors_.rows() < 1) throw Error(Errc::InvalidEmbedding, "empty embedding set");
  if (vectors_.cols() < 2) throw Error(Errc::InvalidEmbedding, "dimension must be >= 2");
  if (labels_.size() != vectors_.rows()) {
    throw Error(Errc::InvalidEmbedding, "label count " + std::to_string(labels_.size()) +
                                            " != row count " + std::to_string(vectors_.rows()));
  }
  for (std::size_t i = 0; i < vectors_.rows(); ++i) {
    const double n = norm(vectors_.row(i));
    if (!(std::abs(n - 1.0) <= kUnitNormTolerance)) {
      throw Error(Errc::InvalidEmbedding,
                  "row " + std::to_string(i) + " has norm " + std::to_string(n));
    }
  }
}

EmbeddingSet EmbeddingSet::from_raw(Matrix vectors, std::vector<ClassId> labels) {
  for (std::size_t i = 0; i < vectors.rows(); ++i) normalize_in_place(vectors.row(i));
  return EmbeddingSet(std::move(vectors), std::move(labels));
}

std::vector<ClassId> EmbeddingSet::classes() const {
  std::vector<ClassId> out(labels_);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::size_t> EmbeddingSet::members(ClassId cls) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == cls) out.push_back(i);
  }
  return out;
}

EmbeddingSet EmbeddingSet::subset(std::span<const std::size_t> rows) const {
  Matrix m(rows.size(), dim());
  std::vector<ClassId> labels;
  labels.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= size()) {
      throw Error(Errc::IndexOutOfRange, "row " + std::to_string(rows[k]));
    }
    std::ranges::copy(row(rows[k]), m.row(k).begin());
    labels.push_back(labels_[rows[k]]);
  }
  EmbeddingSet out;
  out.vectors_ = std::move(m);
  out.labels_ = std::move(labels);
  return out;
}

double dot(std::span<const double> u, std::span<const double> v) {
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * v[i];
  return acc;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

std::vector<double> normalize(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  normalize_in_place(out);
  return out;
}

void normalize_in_place(std::span<double> v) {
  const double n = norm(v);
  if (!(n > kZeroNorm)) throw Error(Errc::ZeroVector, "norm " + std::to_string(n));
  for (double& x : v) x /= n;
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error(Errc::DimensionMismatch,
                std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  }
  return std::clamp(dot(u, v), -1.0, 1.0);
}

double cos_to_l2(double s) {
  if (!(s >= -1.0 - kDomainSlack && s <= 1.0 + kDomainSlack)) {
    throw Error(Errc::OutOfRange, "similarity " + std::to_string(s));
  }
  s = std::clamp(s, -1.0, 1.0);
  return std::sqrt(2.0 - 2.0 * s);
}

double l2_to_cos(double d) {
  if (!(d >= -kDomainSlack && d <= 2.0 + kDomainSlack)) {
    throw Error(Errc::OutOfRange, "distance " + std::to_string(d));
  }
  d = std::clamp(d, 0.0, 2.0);
  return 1.0 - 0.5 * d * d;
}

}  // namespace calm
