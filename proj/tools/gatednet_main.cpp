// gatednet CLI: train / eval / compare / report.
//
// Exit codes: 0 success, 2 configuration error, 3 collapse abort, 4 I/O error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gatednet/checkpoint.hpp"
#include "gatednet/config.hpp"
#include "gatednet/error.hpp"
#include "gatednet/report.hpp"

namespace fs = std::filesystem;
using namespace gatednet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitCollapse = 3;
constexpr int kExitIo = 4;

struct CommonFlags {
  std::string config_path;
  std::string data_dir;
  std::string out_dir;
  std::string variant;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void apply_overrides(RunConfig& cfg, const CommonFlags& flags) {
  if (!flags.data_dir.empty()) cfg.data.dir = flags.data_dir;
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (flags.seed_set) cfg.train.seed = flags.seed;
  if (!flags.variant.empty()) {
    const auto v = variant_from_name(flags.variant);
    if (!v) throw ConfigError("unknown variant '" + flags.variant + "'");
    cfg.train.variant = *v;
    cfg.train.validate();
  }
}

// Trains one run and writes checkpoint.bin, metrics.jsonl, summary.json.
RunSummary run_training(const RunConfig& cfg, const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir);

  auto [train_set, test_set] = load_data(cfg.data);
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult result = train(cfg.train, train_set, test_set);
  const auto t1 = std::chrono::steady_clock::now();

  write_metrics_jsonl(result.records, (fs::path(out_dir) / "metrics.jsonl").string());
  save_checkpoint(result.model, (fs::path(out_dir) / "checkpoint.bin").string());

  RunSummary summary;
  summary.variant = variant_name(cfg.train.variant);
  summary.seed = cfg.train.seed;
  summary.dims = cfg.train.dims;
  summary.aborted = result.aborted;
  summary.abort_reason = result.abort_reason;
  summary.wall_seconds = std::chrono::duration<double>(t1 - t0).count();

  std::vector<std::size_t> gated_widths;
  if (cfg.train.variant == Variant::kDynamic || cfg.train.variant == Variant::kFused) {
    for (std::size_t v : cfg.train.gate.gated_vectors)
      gated_widths.push_back(cfg.train.dims[v]);
  }
  const ParamFlopCounts counts = count_params_flops(cfg.train.dims, gated_widths);
  summary.params = counts.params;
  summary.gate_params = counts.gate_params;
  summary.flops_dense = counts.flops;

  if (!result.records.empty()) {
    const RunRecord& last = result.records.back();
    summary.relmac_p = last.relmac_p;
    summary.relmac_g = last.relmac_fuse_g;  // density folded in; == relmac_g when dense
    summary.rho = last.rho;
    summary.test_accuracy = last.val_accuracy;
  }

  std::ofstream out(fs::path(out_dir) / "summary.json");
  if (!out) throw IoError("cannot write summary.json under " + out_dir);
  out << serialize_run_summary(summary);
  return summary;
}

int cmd_train(const CommonFlags& flags) {
  RunConfig cfg = load_run_config(flags.config_path);
  apply_overrides(cfg, flags);
  const RunSummary summary = run_training(cfg, cfg.out_dir);
  std::cout << "variant=" << summary.variant << " seed=" << summary.seed
            << " test_accuracy=" << summary.test_accuracy * 100.0
            << "% relmac_g=" << summary.relmac_g << "\n"
            << "artifacts written to " << cfg.out_dir << "\n";
  if (summary.aborted) {
    std::cerr << "training aborted: " << summary.abort_reason << "\n";
    return kExitCollapse;
  }
  return kExitOk;
}

int cmd_eval(const CommonFlags& flags, const std::string& checkpoint_path, double theta,
             bool theta_set) {
  RunConfig cfg = load_run_config(flags.config_path);
  apply_overrides(cfg, flags);
  GatedMlp model = load_checkpoint(checkpoint_path);
  auto [train_set, test_set] = load_data(cfg.data);
  (void)train_set;

  double use_theta = theta;
  if (!theta_set) {
    use_theta = 0.5;
    for (std::size_t v = 0; v < model.layer_count(); ++v) {
      if (const GateParams* g = model.gate_at(v)) {
        use_theta = g->theta;
        break;
      }
    }
  }
  const EvalResult res = evaluate(model, test_set, use_theta);
  std::cout << "test_accuracy=" << res.accuracy * 100.0 << "% theta=" << use_theta << "\n";
  for (std::size_t l = 0; l < res.usages.size(); ++l) {
    std::cout << "layer " << l + 1 << ": alpha_g=" << res.usages[l].alpha_g
              << " alpha_p=" << res.usages[l].alpha_p << " rho=" << res.usages[l].rho << "\n";
  }
  std::cout << "relmac_g=" << relmac_fuse(res.usages, AlphaKind::kG) << "\n";
  return kExitOk;
}

std::vector<std::string> split_csv_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_compare(const CommonFlags& flags, const std::string& config_dir,
                const std::string& variants_arg, const std::string& seeds_arg,
                const std::string& format_name) {
  const auto variants = split_csv_list(variants_arg);
  if (variants.empty()) throw ConfigError("compare: --variants list is empty");
  std::vector<std::uint64_t> seeds;
  for (const auto& s : split_csv_list(seeds_arg)) seeds.push_back(std::stoull(s));
  const auto format = report_format_from_name(format_name);
  if (!format) throw ConfigError("unknown report format '" + format_name + "'");

  const std::string out_root = flags.out_dir.empty() ? "runs/compare" : flags.out_dir;
  std::vector<ComparisonRow> rows;
  for (const auto& variant : variants) {
    // Per-variant config <variant>.json, falling back to base.json.
    fs::path cfg_path = fs::path(config_dir) / (variant + ".json");
    if (!fs::exists(cfg_path)) cfg_path = fs::path(config_dir) / "base.json";
    std::vector<ComparisonRow> per_seed;
    try {
      RunConfig base = load_run_config(cfg_path.string());
      CommonFlags vf = flags;
      vf.out_dir.clear();
      vf.variant = variant;
      apply_overrides(base, vf);

      std::vector<std::uint64_t> run_seeds = seeds.empty()
                                                 ? std::vector<std::uint64_t>{base.train.seed}
                                                 : seeds;
      for (std::uint64_t seed : run_seeds) {
        RunConfig run_cfg = base;
        run_cfg.train.seed = seed;
        const std::string run_dir =
            (fs::path(out_root) / (variant + "_seed" + std::to_string(seed))).string();
        per_seed.push_back(summary_to_row(run_training(run_cfg, run_dir)));
        per_seed.back().model = variant;
      }
      rows.push_back(aggregate_rows(per_seed));
    } catch (const std::exception& e) {
      // One failing variant must not sink the others.
      ComparisonRow row;
      row.model = variant;
      row.failed = true;
      row.error = e.what();
      rows.push_back(row);
    }
  }

  std::error_code ec;
  fs::create_directories(out_root, ec);
  if (ec) throw IoError("cannot create output directory " + out_root);
  emit_report(rows, ReportFormat::kCsv, (fs::path(out_root) / "comparison.csv").string());
  {
    std::ofstream pareto(fs::path(out_root) / "pareto.csv");
    if (!pareto) throw IoError("cannot write pareto.csv under " + out_root);
    pareto << render_pareto_csv(rows);
  }
  std::cout << render_report(rows, *format);
  return kExitOk;
}

int cmd_report(const std::string& runs_arg, const std::string& format_name,
               const std::string& out_path) {
  const auto run_dirs = split_csv_list(runs_arg);
  if (run_dirs.empty()) throw ConfigError("report: --runs list is empty");
  const auto format = report_format_from_name(format_name);
  if (!format) throw ConfigError("unknown report format '" + format_name + "'");

  std::vector<ComparisonRow> rows;
  for (const auto& dir : run_dirs) {
    const fs::path summary = fs::path(dir) / "summary.json";
    rows.push_back(summary_to_row(load_run_summary(summary.string())));
  }
  if (out_path.empty()) {
    std::cout << render_report(rows, *format);
  } else {
    emit_report(rows, *format, out_path);
    std::cout << "report written to " << out_path << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DynamicGate-MLP training and comparison toolkit"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string checkpoint_path, variants_arg, seeds_arg, config_dir, runs_arg;
  std::string format_name = "table";
  std::string report_out;
  double theta = 0.5;

  auto add_common = [&flags](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", flags.config_path, "Run configuration file");
    if (config_required) opt->required();
    sub->add_option("--data-dir", flags.data_dir,
                    "Dataset directory (falls back to GATEDNET_DATA_DIR)");
    sub->add_option("--out-dir", flags.out_dir, "Output directory override");
    sub->add_option("--variant", flags.variant, "Variant override");
    sub->add_option("--seed", flags.seed, "Seed override")
        ->each([&flags](const std::string&) { flags.seed_set = true; });
  };

  CLI::App* train_cmd = app.add_subcommand("train", "Train one variant from a config");
  add_common(train_cmd, true);

  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  add_common(eval_cmd, true);
  eval_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  auto* theta_opt = eval_cmd->add_option("--theta", theta, "Hard-gate threshold override");

  CLI::App* compare_cmd =
      app.add_subcommand("compare", "Train several variants and emit a comparison table");
  compare_cmd->add_option("--config-dir", config_dir, "Directory with <variant>.json/base.json")
      ->required();
  compare_cmd->add_option("--variants", variants_arg, "Comma-separated variant list")
      ->required();
  compare_cmd->add_option("--seeds", seeds_arg, "Comma-separated seed sweep");
  compare_cmd->add_option("--format", format_name, "csv|jsonl|table");
  compare_cmd->add_option("--data-dir", flags.data_dir, "Dataset directory");
  compare_cmd->add_option("--out-dir", flags.out_dir, "Output root for the comparison runs");

  CLI::App* report_cmd = app.add_subcommand("report", "Re-render reports from run summaries");
  report_cmd->add_option("--runs", runs_arg, "Comma-separated run directories")->required();
  report_cmd->add_option("--format", format_name, "csv|jsonl|table");
  report_cmd->add_option("--out", report_out, "Write to file instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(train_cmd)) return cmd_train(flags);
    if (app.got_subcommand(eval_cmd))
      return cmd_eval(flags, checkpoint_path, theta, theta_opt->count() > 0);
    if (app.got_subcommand(compare_cmd))
      return cmd_compare(flags, config_dir, variants_arg, seeds_arg, format_name);
    if (app.got_subcommand(report_cmd)) return cmd_report(runs_arg, format_name, report_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
