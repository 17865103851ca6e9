#include "calm/vmf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "calm/error.hpp"

namespace calm {

double estimate_kappa(double r_bar, std::size_t dim) {
  if (dim < 2) throw Error(Errc::OutOfRange, "dimension must be >= 2");
  if (!(r_bar >= 0.0)) throw Error(Errc::OutOfRange, "negative resultant length");
  if (r_bar >= kMaxResultantLength) {
    throw Error(Errc::Degenerate, "resultant length " + std::to_string(r_bar) + " too close to 1");
  }
  const double r2 = r_bar * r_bar;
  return r_bar * (static_cast<double>(dim) - r2) / (1.0 - r2);
}

double compactness_score(double kappa, double kappa_min, double kappa_max) {
  if (!(kappa_min < kappa_max)) {
    throw Error(Errc::InvalidBounds, "kappa_min must be < kappa_max");
  }
  const double z = (2.0 * kappa - kappa_min - kappa_max) / (kappa_max - kappa_min);
  return std::clamp(z, -1.0, 1.0);
}

double vmf_weight(double z) { return 1.0 / (1.0 + std::exp(z)); }

std::vector<double> adaptive_margins(std::span<const double> weights, double m_plus) {
  if (weights.empty()) throw Error(Errc::EmptyInput, "no class weights");
  for (double w : weights) {
    if (!(w > 0.0)) throw Error(Errc::OutOfRange, "weights must be positive");
  }
  const double mean =
      std::accumulate(weights.begin(), weights.end(), 0.0) / static_cast<double>(weights.size());
  std::vector<double> out;
  out.reserve(weights.size());
  for (double w : weights) out.push_back(m_plus * w / mean);
  return out;
}

void ClassMeanTable::update(const EmbeddingSet& batch) {
  if (batch.dim() != dim_) throw Error(Errc::DimensionMismatch, "batch dimension differs from table");
  for (std::size_t i = 0; i < batch.size(); ++i) update(batch.row(i), batch.label(i));
}

void ClassMeanTable::update(std::span<const double> embedding, ClassId cls) {
  if (embedding.size() != dim_) throw Error(Errc::DimensionMismatch, "embedding dimension differs from table");
  Entry& e = entries_[cls];
  if (e.sum.empty()) e.sum.assign(dim_, 0.0);
  for (std::size_t k = 0; k < dim_; ++k) e.sum[k] += embedding[k];
  ++e.count;
}

void ClassMeanTable::reset() { entries_.clear(); }

double ClassMeanTable::resultant_length(ClassId cls) const {
  auto it = entries_.find(cls);
  if (it == entries_.end() || it->second.count == 0) {
    throw Error(Errc::InsufficientSamples, "class " + std::to_string(cls) + " unseen");
  }
  return norm(it->second.sum) / static_cast<double>(it->second.count);
}

std::map<ClassId, double> VmfState::margins() const {
  std::map<ClassId, double> out;
  for (const auto& [cls, v] : classes) out[cls] = v.m_plus;
  return out;
}

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) throw Error(Errc::EmptyInput, "percentile of nothing");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * std::clamp(pct, 0.0, 100.0) / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

VmfState epoch_refresh(ClassMeanTable& table, double m_plus, const VmfState* previous,
                       double percentile_lo, double percentile_hi) {
  VmfState state;
  std::vector<ClassId> fresh;
  std::vector<double> kappas;
  for (const auto& [cls, entry] : table.entries()) {
    if (entry.count < 2) {
      state.stale.push_back(cls);
      continue;
    }
    ClassVmf v;
    v.count = entry.count;
    v.r_bar = std::min(table.resultant_length(cls), std::nextafter(kMaxResultantLength, 0.0));
    v.kappa = estimate_kappa(v.r_bar, table.dim());
    state.classes[cls] = v;
    fresh.push_back(cls);
    kappas.push_back(v.kappa);
  }
  if (fresh.empty()) throw Error(Errc::InsufficientSamples, "no class has two samples this epoch");

  state.kappa_min = percentile(kappas, percentile_lo);
  state.kappa_max = percentile(kappas, percentile_hi);
  const double scale = std::max(1.0, std::abs(state.kappa_max));
  state.homogeneous = !(state.kappa_max - state.kappa_min > 1e-9 * scale);

  std::vector<double> weights;
  for (ClassId cls : fresh) {
    ClassVmf& v = state.classes[cls];
    v.z = state.homogeneous ? 0.0 : compactness_score(v.kappa, state.kappa_min, state.kappa_max);
    v.weight = vmf_weight(v.z);
    weights.push_back(v.weight);
  }
  const auto margins = adaptive_margins(weights, m_plus);
  for (std::size_t i = 0; i < fresh.size(); ++i) state.classes[fresh[i]].m_plus = margins[i];

  for (ClassId cls : state.stale) {
    ClassVmf v;
    v.m_plus = m_plus;
    if (previous != nullptr) {
      auto it = previous->classes.find(cls);
      if (it != previous->classes.end()) v = it->second;
    }
    v.count = table.entries().at(cls).count;
    state.classes[cls] = v;
  }
  table.reset();
  return state;
}

}  // namespace calm
