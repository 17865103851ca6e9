#include "calm/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <ostream>
#include <thread>

#include "calm/cli/embedding_file.hpp"
#include "calm/cli/errors.hpp"
#include "calm/cli/format.hpp"
#include "calm/synth.hpp"

#ifndef CALM_VERSION
#define CALM_VERSION "0.0.0"
#endif

namespace calm::cli {

namespace {

using nlohmann::json;

constexpr int kCheckpointSchemaVersion = 1;

std::filesystem::path sibling(const std::filesystem::path& path, const std::string& suffix) {
  std::filesystem::path out = path;
  out.replace_extension();
  out += suffix;
  return out;
}

json metadata(const CommandContext& ctx) {
  return {{"created_utc", utc_timestamp()},
          {"tool_version", CALM_VERSION},
          {"command_line", ctx.command_line},
          {"threads", ctx.threads}};
}

void emit_summary(const CommandContext& ctx, const json& summary) {
  if (ctx.out != nullptr) *ctx.out << summary.dump() << '\n';
}

RunConfig load_config(const std::filesystem::path& path, const std::optional<std::uint64_t>& seed) {
  RunConfig cfg = load_run_config(path);
  if (seed) cfg.set_seed(*seed);
  return cfg;
}

double nan_if_missing(const EvalReport& report, std::size_t k) {
  for (const auto& [kk, v] : report.recall) {
    if (kk == k) return v;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json checkpoint_json(const TrainState& state, TrainMode mode) {
  json out = {{"schema_version", kCheckpointSchemaVersion},
              {"epoch", state.epoch},
              {"mode", std::string(to_string(mode))}};
  out["encoder"] = nullptr;
  if (state.encoder.rows() != 0) {
    out["encoder"] = {{"rows", state.encoder.rows()},
                      {"cols", state.encoder.cols()},
                      {"data", std::vector<double>(state.encoder.data().begin(), state.encoder.data().end())}};
  }
  return out;
}

TrainState load_checkpoint(const std::filesystem::path& path, const EmbeddingSet& data, const TrainConfig& cfg) {
  const LoadedEmbeddings saved = load_embeddings(path);
  const std::filesystem::path side = sibling(path, ".json");
  json meta;
  try {
    meta = json::parse(read_text_file(side));
  } catch (const json::exception& e) {
    throw IoError("malformed checkpoint sidecar " + side.string() + ": " + e.what());
  }
  if (meta.value("schema_version", 0) != kCheckpointSchemaVersion) {
    throw IoError("unsupported checkpoint sidecar version in " + side.string());
  }
  if (meta.value("mode", std::string()) != to_string(cfg.mode)) {
    throw ConfigError("checkpoint was written in mode '" + meta.value("mode", std::string()) + "'");
  }
  if (saved.set.labels() != data.labels()) throw ConfigError("checkpoint labels differ from the configured data");

  TrainState state;
  state.epoch = meta.at("epoch").get<std::size_t>();
  if (cfg.mode == TrainMode::FreeEmbedding) {
    state.inputs = saved.set;
    state.embeddings = saved.set;
    return state;
  }
  const json& enc = meta.at("encoder");
  const auto rows = enc.at("rows").get<std::size_t>();
  const auto cols = enc.at("cols").get<std::size_t>();
  const auto values = enc.at("data").get<std::vector<double>>();
  if (cols != data.dim() || values.size() != rows * cols) throw ConfigError("checkpoint encoder shape mismatch");
  state.inputs = data;
  state.encoder = Matrix(rows, cols);
  std::copy(values.begin(), values.end(), state.encoder.data().begin());
  state.embeddings = apply_encoder(state.encoder, data);
  return state;
}

}  // namespace

ExitCode exit_code_for(Errc code) noexcept {
  switch (code) {
    case Errc::InsufficientPairs:
    case Errc::DegenerateRange:
    case Errc::SingleClass:
      return ExitCode::Data;
    case Errc::NonFiniteLoss:
      return ExitCode::NonFinite;
    case Errc::InvalidConfig:
      return ExitCode::ConfigParse;
    default:
      return ExitCode::Failure;
  }
}

void cmd_gen(const GenOptions& opt, const CommandContext& ctx) {
  const RunConfig cfg = load_config(opt.config, opt.seed);
  if (!cfg.synth) throw ConfigError("gen needs a 'synth' section");
  SynthConfig synth = *cfg.synth;
  synth.seed = cfg.seed;
  const SynthDataset ds = make_dataset(synth);

  save_embeddings(opt.output, ds.set);
  json centroids = json::array();
  for (std::size_t j = 0; j < ds.centroids.rows(); ++j) {
    centroids.push_back(std::vector<double>(ds.centroids.row(j).begin(), ds.centroids.row(j).end()));
  }
  const json sidecar = {{"schema_version", kReportSchemaVersion},
                        {"seed", synth.seed},
                        {"classes", synth.classes},
                        {"dim", synth.dim},
                        {"samples_per_class", synth.samples_per_class},
                        {"placement", std::string(to_string(synth.placement))},
                        {"kappas", ds.kappas},
                        {"centroids", std::move(centroids)}};
  const auto kappa_path = sibling(opt.output, ".kappa.json");
  write_text_file(kappa_path, dump(sidecar));
  json meta = metadata(ctx);
  meta["config"] = to_json(cfg);
  write_text_file(sibling(opt.output, ".meta.json"), dump(meta));

  emit_summary(ctx, {{"output", opt.output.generic_string()},
                     {"kappa_sidecar", kappa_path.generic_string()},
                     {"samples", ds.set.size()},
                     {"classes", synth.classes}});
}

void cmd_eval(const EvalOptions& opt, const CommandContext& ctx) {
  validate_eval(opt.eval);
  const LoadedEmbeddings loaded = load_embeddings(opt.input);
  if (loaded.set.classes().size() < 2) throw Error(Errc::SingleClass, "evaluation needs at least two classes");
  const EvalReport report = evaluate(loaded.set, opt.eval);

  json doc = report_json(report, opt.eval, loaded.set);
  write_text_file(opt.out, dump(doc));
  const auto curves = opt.curves.value_or(sibling(opt.out, ".curves.csv"));
  write_text_file(curves, curves_csv(report));
  json meta = metadata(ctx);
  meta["input"] = opt.input.generic_string();
  meta["max_load_deviation"] = loaded.max_deviation;
  meta["seed"] = opt.eval.seed;
  write_text_file(sibling(opt.out, ".meta.json"), dump(meta));

  emit_summary(ctx, {{"opis", finite_or_null(report.opis.opis)},
                     {"recall1", finite_or_null(nan_if_missing(report, 1))},
                     {"report", opt.out.generic_string()}});
}

EmbeddingSet load_training_data(const RunConfig& cfg) {
  if (cfg.data) return load_embeddings(*cfg.data).set;
  if (cfg.synth) {
    SynthConfig synth = *cfg.synth;
    synth.seed = cfg.seed;
    return make_dataset(synth).set;
  }
  throw ConfigError("config needs a 'synth' or 'data' section");
}

TrainingOutcome run_training(const RunConfig& cfg, const EmbeddingSet& data, const std::optional<TrainState>& resume) {
  TrainingOutcome out;
  const TrainState start = resume ? *resume : TrainState::initial(data, cfg.train);
  out.result = train(start, cfg.train);
  if (cfg.train.adacam.enabled) {
    TrainResult ada = finetune_adacam(out.result.state, cfg.train);
    out.adacam_first_epoch = out.result.state.epoch + 1;
    for (const EpochRecord& r : ada.history.records) out.result.history.records.push_back(r);
    out.result.history.lr_scale = ada.history.lr_scale;
    out.result.state = std::move(ada.state);
    out.result.vmf_states = std::move(ada.vmf_states);
  }
  out.report = evaluate(out.result.state.embeddings, cfg.eval);
  return out;
}

void cmd_train(const TrainOptions& opt, const CommandContext& ctx) {
  RunConfig cfg = load_config(opt.config, opt.seed);
  if (opt.disable_cam) {
    if (cfg.train.base.kind == BaseLossKind::None) throw ConfigError("--no-cam with no base loss leaves nothing to train");
    cfg.train.cam.reset();
    cfg.train.adacam.enabled = false;
  }
  const EmbeddingSet data = load_training_data(cfg);
  std::optional<TrainState> resume;
  if (opt.resume) resume = load_checkpoint(*opt.resume, data, cfg.train);

  TrainingOutcome outcome;
  try {
    outcome = run_training(cfg, data, resume);
  } catch (const Error& e) {
    if (e.code() != Errc::NonFiniteLoss) throw;
    const auto dump_path = opt.out_dir / "nonfinite_dump.json";
    json diag = {{"error", std::string(to_string(e.code()))}, {"detail", e.detail()}, {"config", to_json(cfg)}};
    write_text_file(dump_path, dump(diag));
    CliError failure(ExitCode::NonFinite, "NonFiniteLoss", e.detail());
    failure.set_dump_path(dump_path.generic_string());
    throw failure;
  }
  const TrainResult& result = outcome.result;

  const auto checkpoint = opt.out_dir / "checkpoint.calm";
  save_embeddings(checkpoint, result.state.embeddings);
  write_text_file(opt.out_dir / "checkpoint.json", dump(checkpoint_json(result.state, cfg.train.mode)));
  write_text_file(opt.out_dir / "history.csv", history_csv(result.history));
  write_text_file(opt.out_dir / "report.json", dump(report_json(outcome.report, cfg.eval, result.state.embeddings)));
  write_text_file(opt.out_dir / "curves.csv", curves_csv(outcome.report));
  if (opt.verbose && cfg.train.adacam.enabled) {
    write_text_file(opt.out_dir / "vmf_states.json",
                    dump(vmf_states_json(result.vmf_states, outcome.adacam_first_epoch)));
  }

  json meta = metadata(ctx);
  meta["lr_scale"] = result.history.lr_scale;
  meta["adacam_lr"] = cfg.train.adacam.enabled ? json(cfg.train.adacam.lr * cfg.train.adacam.lr_scale) : json(nullptr);
  meta["resumed_from"] = opt.resume ? json(opt.resume->generic_string()) : json(nullptr);
  meta["config"] = to_json(cfg);
  write_text_file(opt.out_dir / "metadata.json", dump(meta));

  emit_summary(ctx, {{"epoch", result.state.epoch},
                     {"opis", finite_or_null(outcome.report.opis.opis)},
                     {"recall1", finite_or_null(nan_if_missing(outcome.report, 1))},
                     {"cam", cfg.train.cam.has_value()},
                     {"adacam", cfg.train.adacam.enabled},
                     {"checkpoint", checkpoint.generic_string()}});
}

void cmd_sweep(const SweepOptions& opt, const CommandContext& ctx) {
  const RunConfig cfg = load_config(opt.config, opt.seed);
  if (opt.m_plus.empty() || opt.m_minus.empty()) throw ConfigError("sweep needs at least one m_plus and one m_minus");
  auto in_open_unit = [](double m) { return m > -1.0 && m < 1.0; };
  if (!std::ranges::all_of(opt.m_plus, in_open_unit) || !std::ranges::all_of(opt.m_minus, in_open_unit)) {
    throw ConfigError("sweep margins must lie in (-1, 1)");
  }
  if (std::ranges::max(opt.m_minus) >= std::ranges::min(opt.m_plus)) {
    throw ConfigError("every m_minus must be below every m_plus");
  }
  const EmbeddingSet data = load_training_data(cfg);
  const CamConfig lambdas = cfg.train.cam.value_or(CamConfig{});

  std::vector<RunConfig> cells;
  RunConfig baseline = cfg;
  baseline.train.cam.reset();
  baseline.train.adacam.enabled = false;
  cells.push_back(baseline);
  for (double mp : opt.m_plus) {
    for (double mm : opt.m_minus) {
      RunConfig c = baseline;
      c.train.cam = CamConfig{mp, mm, lambdas.lambda_plus, lambdas.lambda_minus};
      cells.push_back(std::move(c));
    }
  }
  for (const RunConfig& c : cells) {
    try {
      c.train.validate();
    } catch (const Error& e) {
      throw ConfigError(e.detail());
    }
  }

  // Cells are independent; results land in their own slot, so the output
  // does not depend on the thread count.
  std::vector<SweepRow> rows(cells.size());
  std::vector<std::exception_ptr> failures(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        const TrainingOutcome o = run_training(cells[i], data);
        const auto& cam = cells[i].train.cam;
        rows[i] = {cam.has_value(), cam ? cam->m_plus : 0.0, cam ? cam->m_minus : 0.0,
                   nan_if_missing(o.report, 1), o.report.opis.opis};
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(ctx.threads, 1, cells.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  write_text_file(opt.out, sweep_csv(rows));
  json meta = metadata(ctx);
  meta["config"] = to_json(cfg);
  meta["m_plus"] = opt.m_plus;
  meta["m_minus"] = opt.m_minus;
  write_text_file(sibling(opt.out, ".meta.json"), dump(meta));

  std::size_t below = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) below += rows[i].opis < rows[0].opis ? 1 : 0;
  emit_summary(ctx, {{"rows", rows.size()},
                     {"baseline_opis", finite_or_null(rows[0].opis)},
                     {"cells_below_baseline", below},
                     {"sweep", opt.out.generic_string()}});
}

int guarded(const std::function<void()>& fn, std::ostream& err) {
  json line;
  int code = 0;
  try {
    fn();
    return 0;
  } catch (const CliError& e) {
    code = static_cast<int>(e.code());
    line = {{"error", e.kind()}, {"detail", e.what()}};
    if (!e.dump_path().empty()) line["dump"] = e.dump_path();
  } catch (const Error& e) {
    code = static_cast<int>(exit_code_for(e.code()));
    line = {{"error", std::string(to_string(e.code()))}, {"detail", e.detail()}};
  } catch (const std::exception& e) {
    code = static_cast<int>(ExitCode::Failure);
    line = {{"error", "InternalError"}, {"detail", e.what()}};
  }
  line["exit_code"] = code;
  err << line.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  return code;
}

}  // namespace calm::cli
