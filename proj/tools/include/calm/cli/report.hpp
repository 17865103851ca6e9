#pragma once

#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "calm/metrics.hpp"
#include "calm/trainer.hpp"
#include "calm/vmf.hpp"

namespace calm::cli {

inline constexpr int kReportSchemaVersion = 1;

/// {schema_version, samples, classes, opis, epsilon_opis[{epsilon, value}],
///  range{d_min, d_max, far_lo, far_hi}, grid, c,
///  per_class[{class_id, contribution, weight}], excluded_classes,
///  recall{"1": .., "2": ..}, pairs{positive, negative}}
nlohmann::json report_json(const EvalReport& report, const EvalConfig& cfg, const EmbeddingSet& set);

/// `class_id,d,utility`; the pooled curve uses class_id "pooled".
std::string curves_csv(const EvalReport& report);

/// `epoch,loss,recall1,opis,selected_positive,selected_negative,adacam,
///  margin_min,margin_mean,margin_max`
std::string history_csv(const TrainHistory& history);

struct SweepRow {
  bool cam = false;  // false for the baseline row
  double m_plus = 0.0;
  double m_minus = 0.0;
  double recall1 = 0.0;
  double opis = 0.0;
};

/// `cam,m_plus,m_minus,recall1,opis`; the baseline row leaves margins empty.
std::string sweep_csv(std::span<const SweepRow> rows);

/// [{epoch, kappa_min, kappa_max, homogeneous, stale,
///   classes[{class_id, count, r_bar, kappa, z, weight, m_plus}]}]
nlohmann::json vmf_states_json(std::span<const VmfState> states, std::size_t first_epoch);

/// Pretty-printed with a trailing newline.
std::string dump(const nlohmann::json& doc);

}  // namespace calm::cli
