#include "calm/cli/report.hpp"

#include <cmath>

#include "calm/cli/format.hpp"

namespace calm::cli {

namespace {

// JSON has no NaN; non-finite values become null.
nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json report_json(const EvalReport& report, const EvalConfig& cfg, const EmbeddingSet& set) {
  using nlohmann::json;
  json out;
  out["schema_version"] = kReportSchemaVersion;
  out["samples"] = set.size();
  out["classes"] = set.classes().size();
  out["opis"] = number(report.opis.opis);

  json eps = json::array();
  for (const auto& [epsilon, value] : report.opis.epsilon_opis) eps.push_back({{"epsilon", epsilon}, {"value", number(value)}});
  out["epsilon_opis"] = std::move(eps);

  out["range"] = {{"d_min", report.range.d_min},
                  {"d_max", report.range.d_max},
                  {"far_lo", report.range.far_lo},
                  {"far_hi", report.range.far_hi}};
  out["grid"] = cfg.grid;
  out["c"] = cfg.c;

  json per_class = json::array();
  for (std::size_t i = 0; i < report.opis.classes.size(); ++i) {
    per_class.push_back({{"class_id", report.opis.classes[i]},
                         {"contribution", number(report.opis.per_class_contribution[i])},
                         {"weight", report.opis.weights[i]}});
  }
  out["per_class"] = std::move(per_class);
  out["excluded_classes"] = report.excluded_classes;

  json recall = json::object();
  for (const auto& [k, value] : report.recall) recall[std::to_string(k)] = number(value);
  out["recall"] = std::move(recall);
  out["pairs"] = {{"positive", report.positive_pairs}, {"negative", report.negative_pairs}};
  return out;
}

std::string curves_csv(const EvalReport& report) {
  std::string out = "class_id,d,utility\n";
  auto emit = [&out](const std::string& id, const UtilityCurve& curve) {
    for (std::size_t g = 0; g < curve.grid.size(); ++g) {
      out += id;
      out += ',';
      out += format_number(curve.grid[g]);
      out += ',';
      out += format_number(curve.values[g]);
      out += '\n';
    }
  };
  for (const UtilityCurve& curve : report.curves) emit(std::to_string(curve.owner.value_or(0)), curve);
  emit("pooled", report.pooled);
  return out;
}

std::string history_csv(const TrainHistory& history) {
  std::string out =
      "epoch,loss,recall1,opis,selected_positive,selected_negative,adacam,margin_min,margin_mean,margin_max\n";
  for (const EpochRecord& r : history.records) {
    out += std::to_string(r.epoch) + ',' + format_number(r.loss) + ',' + format_number(r.recall1) + ',' +
           format_number(r.opis) + ',' + std::to_string(r.selected_positive) + ',' +
           std::to_string(r.selected_negative) + ',' + (r.adacam ? "1" : "0") + ',' + format_number(r.margin_min) +
           ',' + format_number(r.margin_mean) + ',' + format_number(r.margin_max) + '\n';
  }
  return out;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "cam,m_plus,m_minus,recall1,opis\n";
  for (const SweepRow& r : rows) {
    out += r.cam ? "1," + format_number(r.m_plus) + ',' + format_number(r.m_minus) : std::string("0,,");
    out += ',' + format_number(r.recall1) + ',' + format_number(r.opis) + '\n';
  }
  return out;
}

nlohmann::json vmf_states_json(std::span<const VmfState> states, std::size_t first_epoch) {
  using nlohmann::json;
  json out = json::array();
  for (std::size_t i = 0; i < states.size(); ++i) {
    const VmfState& s = states[i];
    json classes = json::array();
    for (const auto& [cls, v] : s.classes) {
      classes.push_back({{"class_id", cls},
                         {"count", v.count},
                         {"r_bar", v.r_bar},
                         {"kappa", number(v.kappa)},
                         {"z", v.z},
                         {"weight", v.weight},
                         {"m_plus", v.m_plus}});
    }
    out.push_back({{"epoch", first_epoch + i},
                   {"kappa_min", number(s.kappa_min)},
                   {"kappa_max", number(s.kappa_max)},
                   {"homogeneous", s.homogeneous},
                   {"stale", s.stale},
                   {"classes", std::move(classes)}});
  }
  return out;
}

std::string dump(const nlohmann::json& doc) { return doc.dump(2) + "\n"; }

}  // namespace calm::cli
