#include <charconv>
#include <iostream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "calm/cli/commands.hpp"
#include "calm/cli/errors.hpp"

namespace {

using namespace calm::cli;

std::pair<double, double> parse_far(const std::string& text) {
  const auto colon = text.find(':');
  auto number = [&](std::string_view s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      throw ConfigError("--far expects LO:HI, got '" + text + "'");
    }
    return v;
  };
  if (colon == std::string::npos) throw ConfigError("--far expects LO:HI, got '" + text + "'");
  const std::string_view all(text);
  return {number(all.substr(0, colon)), number(all.substr(colon + 1))};
}

std::string join_args(int argc, char** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) {
    if (i > 0) out += ' ';
    out += argv[i];
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calibration-aware metric learning: generate, train, evaluate, sweep"};
  app.require_subcommand(1);
  app.set_version_flag("--version", CALM_VERSION);

  CommandContext ctx;
  ctx.out = &std::cout;
  ctx.command_line = join_args(argc, argv);
  ctx.threads = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--threads", ctx.threads, "Worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);

  std::uint64_t seed = 0;

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic vMF dataset");
  gen_cmd->add_option("config", gen.config, "Run config (JSON)")->required();
  gen_cmd->add_option("output", gen.output, "Embedding file (.calm binary or .csv)")->required();
  auto* gen_seed = gen_cmd->add_option("--seed", seed, "Override the config seed");

  EvalOptions eval;
  std::string far = "1e-2:1e-1";
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate OPIS, epsilon-OPIS and recall@k");
  eval_cmd->add_option("input", eval.input, "Embedding file")->required();
  eval_cmd->add_option("--far", far, "FAR band LO:HI")->capture_default_str();
  eval_cmd->add_option("--grid", eval.eval.grid, "Threshold grid points")->capture_default_str();
  eval_cmd->add_option("--c", eval.eval.c, "Utility trade-off c")->capture_default_str();
  eval_cmd->add_option("--epsilon", eval.eval.epsilons, "Epsilon percentages")->delimiter(',')->capture_default_str();
  eval_cmd->add_option("--ratio", eval.eval.ratio, "Negatives per positive (0: all pairs)")->capture_default_str();
  eval_cmd->add_option("--recall-k", eval.eval.recall_ks, "Recall cut-offs")->delimiter(',')->capture_default_str();
  eval_cmd->add_option("--seed", eval.eval.seed, "Negative sampling seed")->capture_default_str();
  eval_cmd->add_option("--out", eval.out, "Report JSON path")->capture_default_str();
  std::string curves;
  eval_cmd->add_option("--curves", curves, "Curves CSV path (default: <out>.curves.csv)");

  TrainOptions train;
  std::string resume;
  auto* train_cmd = app.add_subcommand("train", "Train, then evaluate the final embeddings");
  train_cmd->add_option("config", train.config, "Run config (JSON)")->required();
  train_cmd->add_option("--out-dir", train.out_dir, "Output directory")->capture_default_str();
  auto* train_seed = train_cmd->add_option("--seed", seed, "Override the config seed");
  train_cmd->add_flag("--no-cam", train.disable_cam, "Train the base loss only");
  train_cmd->add_option("--resume", resume, "Continue from a checkpoint.calm");
  train_cmd->add_flag("--verbose", train.verbose, "Also write per-epoch vMF states");

  SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Grid of CAM margins against a CAM-free baseline");
  sweep_cmd->add_option("config", sweep.config, "Run config (JSON)")->required();
  sweep_cmd->add_option("--m-plus", sweep.m_plus, "Positive margins")->delimiter(',')->required();
  sweep_cmd->add_option("--m-minus", sweep.m_minus, "Negative margins")->delimiter(',')->required();
  sweep_cmd->add_option("--out", sweep.out, "Sweep CSV path")->capture_default_str();
  auto* sweep_seed = sweep_cmd->add_option("--seed", seed, "Override the config seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return guarded([&] { throw CliError(ExitCode::ConfigParse, "UsageError", e.what()); }, std::cerr);
  }

  return guarded(
      [&] {
        if (*gen_cmd) {
          if (*gen_seed) gen.seed = seed;
          cmd_gen(gen, ctx);
        } else if (*eval_cmd) {
          std::tie(eval.eval.far_lo, eval.eval.far_hi) = parse_far(far);
          if (!curves.empty()) eval.curves = curves;
          cmd_eval(eval, ctx);
        } else if (*train_cmd) {
          if (*train_seed) train.seed = seed;
          if (!resume.empty()) train.resume = resume;
          cmd_train(train, ctx);
        } else if (*sweep_cmd) {
          if (*sweep_seed) sweep.seed = seed;
          cmd_sweep(sweep, ctx);
        }
      },
      std::cerr);
}
