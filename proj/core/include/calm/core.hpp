#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace calm {

using ClassId = std::uint32_t;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline constexpr double kUnitNormTolerance = 1e-9;

/// N labeled unit vectors of dimension M.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;

  /// Validates: N >= 1, M >= 2, one label per row, every row unit-norm to
  /// kUnitNormTolerance. Throws Error{InvalidEmbedding} otherwise.
  EmbeddingSet(Matrix vectors, std::vector<ClassId> labels);

  /// Normalizes every row first, then validates.
  static EmbeddingSet from_raw(Matrix vectors, std::vector<ClassId> labels);

  std::size_t size() const noexcept { return vectors_.rows(); }
  std::size_t dim() const noexcept { return vectors_.cols(); }

  const Matrix& vectors() const noexcept { return vectors_; }
  std::span<const double> row(std::size_t i) const noexcept { return vectors_.row(i); }
  const std::vector<ClassId>& labels() const noexcept { return labels_; }
  ClassId label(std::size_t i) const noexcept { return labels_[i]; }

  /// Sorted distinct labels.
  std::vector<ClassId> classes() const;

  /// Row indices of a class, ascending.
  std::vector<std::size_t> members(ClassId cls) const;

  /// Copy of the selected rows (in the given order) with their labels.
  EmbeddingSet subset(std::span<const std::size_t> rows) const;

  friend bool operator==(const EmbeddingSet&, const EmbeddingSet&) = default;

 private:
  Matrix vectors_;
  std::vector<ClassId> labels_;
};

double dot(std::span<const double> u, std::span<const double> v);
double norm(std::span<const double> v);

/// Unit vector in the direction of v. Throws ZeroVector if ||v|| <= 1e-12.
std::vector<double> normalize(std::span<const double> v);
void normalize_in_place(std::span<double> v);

/// Dot product of two unit vectors clamped to [-1, 1].
/// Throws DimensionMismatch on differing lengths.
double cosine(std::span<const double> u, std::span<const double> v);

/// d = sqrt(2 - 2s). Inputs up to 1e-9 outside [-1, 1] are clamped; anything
/// further throws OutOfRange.
double cos_to_l2(double s);

/// s = 1 - d^2 / 2, the inverse of cos_to_l2 on [0, 2].
double l2_to_cos(double d);

}  // namespace calm
