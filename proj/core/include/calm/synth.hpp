#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "calm/core.hpp"
#include "calm/random.hpp"

namespace calm {

/// Draws n samples from vMF(mu, kappa) with Wood's (1994) rejection sampler:
/// the component along mu is drawn from the exact marginal using the
/// envelope b = (M-1) / (2 kappa + sqrt(4 kappa^2 + (M-1)^2)), and the
/// tangent direction uniformly. kappa = 0 gives the uniform distribution.
/// Rows are unit-norm; mu must be unit-norm.
Matrix sample_vmf(std::span<const double> mu, double kappa, std::size_t n, std::uint64_t seed);
Matrix sample_vmf(std::span<const double> mu, double kappa, std::size_t n, Rng& rng);

/// Uniformly random unit vector.
std::vector<double> random_unit_vector(std::size_t dim, Rng& rng);

enum class CentroidPlacement { Uniform, NearAntipodal, Clustered };

CentroidPlacement parse_placement(std::string_view name);
std::string_view to_string(CentroidPlacement placement);

struct SynthConfig {
  std::size_t classes = 20;
  /// Explicit per-class kappa; when empty, kappa is drawn uniformly from
  /// [kappa_lo, kappa_hi].
  std::vector<double> kappas;
  double kappa_lo = 5.0;
  double kappa_hi = 100.0;
  std::size_t samples_per_class = 40;
  std::size_t dim = 16;
  CentroidPlacement placement = CentroidPlacement::Uniform;
  /// Clustered placement: number of centroid clusters and their concentration.
  std::size_t clusters = 3;
  double cluster_kappa = 20.0;
  /// Near-antipodal placement: concentration of the jitter around -mu.
  double antipodal_kappa = 200.0;
  std::uint64_t seed = 0;

  /// Throws InvalidConfig.
  void validate() const;
};

struct SynthDataset {
  EmbeddingSet set;
  std::vector<double> kappas;  // ground truth per class id 0..T-1
  Matrix centroids;
};

/// Class j has label j; rows are grouped by class in ascending order.
SynthDataset make_dataset(const SynthConfig& cfg);

}  // namespace calm
