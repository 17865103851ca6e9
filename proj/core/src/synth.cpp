#include "calm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "calm/error.hpp"

namespace calm {

namespace {

// Sub-stream tags for Rng::derive.
constexpr std::uint64_t kKappaStream = 0x6b617070;
constexpr std::uint64_t kCentroidStream = 0x63656e74;
constexpr std::uint64_t kSampleStream = 0x73616d70;

double chi_square(std::size_t dof, Rng& rng) {
  double acc = 0.0;
  for (std::size_t i = 0; i < dof; ++i) {
    const double g = rng.normal();
    acc += g * g;
  }
  return acc;
}

// Component along the mean direction, from Wood's envelope.
double sample_vmf_cosine(double kappa, std::size_t dim, Rng& rng) {
  const double m1 = static_cast<double>(dim - 1);
  const double b = m1 / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + m1 * m1));
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + m1 * std::log(1.0 - x0 * x0);
  for (;;) {
    const double x = chi_square(dim - 1, rng);
    const double y = chi_square(dim - 1, rng);
    const double z = x / (x + y);  // Beta((M-1)/2, (M-1)/2)
    const double w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
    const double u = rng.uniform_open0();
    if (kappa * w + m1 * std::log(1.0 - x0 * w) - c >= std::log(u)) return w;
  }
}

}  // namespace

std::vector<double> random_unit_vector(std::size_t dim, Rng& rng) {
  std::vector<double> v(dim);
  for (;;) {
    for (double& x : v) x = rng.normal();
    if (norm(v) > 1e-6) break;
  }
  normalize_in_place(v);
  return v;
}

Matrix sample_vmf(std::span<const double> mu, double kappa, std::size_t n, Rng& rng) {
  const std::size_t dim = mu.size();
  if (dim < 2) throw Error(Errc::OutOfRange, "vMF dimension must be >= 2");
  if (!(kappa >= 0.0)) throw Error(Errc::OutOfRange, "kappa must be >= 0");
  if (std::abs(norm(mu) - 1.0) > kUnitNormTolerance) throw Error(Errc::InvalidEmbedding, "mu must be unit-norm");

  // Householder reflection taking e1 to mu.
  std::vector<double> h(mu.begin(), mu.end());
  for (double& x : h) x = -x;
  h[0] += 1.0;
  const double hh = dot(h, h);
  const bool reflect = hh > 1e-24;

  Matrix out(n, dim);
  std::vector<double> x(dim);
  for (std::size_t r = 0; r < n; ++r) {
    const double w = sample_vmf_cosine(kappa, dim, rng);
    const std::vector<double> tangent = random_unit_vector(dim - 1, rng);
    const double radial = std::sqrt(std::max(0.0, 1.0 - w * w));
    x[0] = w;
    for (std::size_t k = 1; k < dim; ++k) x[k] = radial * tangent[k - 1];
    if (reflect) {
      const double proj = 2.0 * dot(h, x) / hh;
      for (std::size_t k = 0; k < dim; ++k) x[k] -= proj * h[k];
    }
    normalize_in_place(x);
    std::ranges::copy(x, out.row(r).begin());
  }
  return out;
}

Matrix sample_vmf(std::span<const double> mu, double kappa, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_vmf(mu, kappa, n, rng);
}

CentroidPlacement parse_placement(std::string_view name) {
  if (name == "uniform") return CentroidPlacement::Uniform;
  if (name == "near_antipodal") return CentroidPlacement::NearAntipodal;
  if (name == "clustered") return CentroidPlacement::Clustered;
  throw Error(Errc::InvalidConfig, "unknown centroid placement '" + std::string(name) + "'");
}

std::string_view to_string(CentroidPlacement placement) {
  switch (placement) {
    case CentroidPlacement::Uniform: return "uniform";
    case CentroidPlacement::NearAntipodal: return "near_antipodal";
    case CentroidPlacement::Clustered: return "clustered";
  }
  return "uniform";
}

void SynthConfig::validate() const {
  if (classes < 2) throw Error(Errc::InvalidConfig, "need at least two classes");
  if (dim < 2) throw Error(Errc::InvalidConfig, "dimension must be >= 2");
  if (samples_per_class < 1) throw Error(Errc::InvalidConfig, "samples_per_class must be >= 1");
  if (!kappas.empty() && kappas.size() != classes) {
    throw Error(Errc::InvalidConfig, "kappas must list one value per class");
  }
  for (double k : kappas) {
    if (!(k >= 0.0)) throw Error(Errc::InvalidConfig, "kappa must be >= 0");
  }
  if (kappas.empty() && !(kappa_lo >= 0.0 && kappa_lo <= kappa_hi)) {
    throw Error(Errc::InvalidConfig, "kappa range must satisfy 0 <= lo <= hi");
  }
  if (placement == CentroidPlacement::Clustered && clusters < 1) {
    throw Error(Errc::InvalidConfig, "clustered placement needs >= 1 cluster");
  }
}

SynthDataset make_dataset(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t t = cfg.classes;

  SynthDataset out;
  out.kappas = cfg.kappas;
  if (out.kappas.empty()) {
    Rng rng(Rng::derive(cfg.seed, kKappaStream));
    for (std::size_t j = 0; j < t; ++j) out.kappas.push_back(cfg.kappa_lo + (cfg.kappa_hi - cfg.kappa_lo) * rng.uniform());
  }

  Rng centroid_rng(Rng::derive(cfg.seed, kCentroidStream));
  out.centroids = Matrix(t, cfg.dim);
  std::vector<std::vector<double>> cluster_centers;
  if (cfg.placement == CentroidPlacement::Clustered) {
    for (std::size_t c = 0; c < cfg.clusters; ++c) cluster_centers.push_back(random_unit_vector(cfg.dim, centroid_rng));
  }
  for (std::size_t j = 0; j < t; ++j) {
    std::vector<double> mu;
    switch (cfg.placement) {
      case CentroidPlacement::Uniform:
        mu = random_unit_vector(cfg.dim, centroid_rng);
        break;
      case CentroidPlacement::NearAntipodal:
        if (j % 2 == 0) {
          mu = random_unit_vector(cfg.dim, centroid_rng);
        } else {
          std::vector<double> opposite(out.centroids.row(j - 1).begin(), out.centroids.row(j - 1).end());
          for (double& x : opposite) x = -x;
          const Matrix jitter = sample_vmf(opposite, cfg.antipodal_kappa, 1, centroid_rng);
          mu.assign(jitter.row(0).begin(), jitter.row(0).end());
        }
        break;
      case CentroidPlacement::Clustered: {
        const Matrix draw = sample_vmf(cluster_centers[j % cfg.clusters], cfg.cluster_kappa, 1, centroid_rng);
        mu.assign(draw.row(0).begin(), draw.row(0).end());
        break;
      }
    }
    std::ranges::copy(mu, out.centroids.row(j).begin());
  }

  Matrix vectors(t * cfg.samples_per_class, cfg.dim);
  std::vector<ClassId> labels;
  labels.reserve(vectors.rows());
  for (std::size_t j = 0; j < t; ++j) {
    const Matrix samples = sample_vmf(out.centroids.row(j), out.kappas[j], cfg.samples_per_class,
                                      Rng::derive(Rng::derive(cfg.seed, kSampleStream), j));
    for (std::size_t i = 0; i < samples.rows(); ++i) {
      std::ranges::copy(samples.row(i), vectors.row(j * cfg.samples_per_class + i).begin());
      labels.push_back(static_cast<ClassId>(j));
    }
  }
  out.set = EmbeddingSet(std::move(vectors), std::move(labels));
  return out;
}

}  // namespace calm
