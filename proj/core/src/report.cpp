#include "gatednet/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gatednet/error.hpp"

namespace gatednet {

namespace {

using nlohmann::json;

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

// Wall time stays out of the row schema on purpose: rows must be identical
// across reruns of the same config+seed. The informational wall-time note
// lives in the table footer and each run's summary.json.
const char* const kComparisonCsvHeader =
    "model,accuracy_pct,accuracy_std,param_reduction_pct,flops_reduction_pct,params,"
    "gate_params,flops,relmac_p,relmac_g,rho,status";

std::optional<ReportFormat> report_format_from_name(const std::string& name) {
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "jsonl") return ReportFormat::kJsonl;
  if (name == "table") return ReportFormat::kTable;
  return std::nullopt;
}

std::string render_report(const std::vector<ComparisonRow>& rows, ReportFormat format) {
  if (rows.empty()) throw ValidationError("render_report: no records");
  std::ostringstream out;
  switch (format) {
    case ReportFormat::kCsv: {
      out << kComparisonCsvHeader << "\n";
      for (const auto& r : rows) {
        out << r.model << ',' << fixed6(r.accuracy_pct) << ',' << fixed6(r.accuracy_std) << ','
            << fixed6(r.param_reduction_pct) << ',' << fixed6(r.flops_reduction_pct) << ','
            << r.params << ',' << r.gate_params << ',' << r.flops << ','
            << fixed6(r.relmac_p) << ',' << fixed6(r.relmac_g) << ',' << r.rho_summary << ','
            << (r.failed ? "failed" : "ok") << "\n";
      }
      break;
    }
    case ReportFormat::kJsonl: {
      for (const auto& r : rows) {
        json obj;  // nlohmann objects serialize with sorted keys
        obj["model"] = r.model;
        obj["accuracy_pct"] = r.accuracy_pct;
        obj["accuracy_std"] = r.accuracy_std;
        obj["param_reduction_pct"] = r.param_reduction_pct;
        obj["flops_reduction_pct"] = r.flops_reduction_pct;
        obj["params"] = r.params;
        obj["gate_params"] = r.gate_params;
        obj["flops"] = r.flops;
        obj["relmac_p"] = r.relmac_p;
        obj["relmac_g"] = r.relmac_g;
        obj["rho"] = r.rho_summary;
        obj["status"] = r.failed ? "failed" : "ok";
        if (!r.error.empty()) obj["error"] = r.error;
        out << obj.dump() << "\n";
      }
      break;
    }
    case ReportFormat::kTable: {
      constexpr const char* fmt = "%-10s %18s %14s %14s %10s %10s %10s %10s %10s\n";
      char line[288];
      std::snprintf(line, sizeof(line), fmt, "Model", "Accuracy(%)", "ParamRed(%)",
                    "FLOPsRed(%)", "Params", "GateParams", "FLOPs", "RelMAC_p", "RelMAC_g");
      out << line;
      for (const auto& r : rows) {
        if (r.failed) {
          std::snprintf(line, sizeof(line), "%-10s FAILED: %s\n", r.model.c_str(),
                        r.error.c_str());
          out << line;
          continue;
        }
        std::string acc = fixed6(r.accuracy_pct);
        if (r.accuracy_std > 0.0) acc += " +/- " + fixed6(r.accuracy_std).substr(0, 5);
        std::snprintf(line, sizeof(line), fmt, r.model.c_str(), acc.c_str(),
                      fixed6(r.param_reduction_pct).c_str(),
                      fixed6(r.flops_reduction_pct).c_str(),
                      std::to_string(r.params).c_str(),
                      std::to_string(r.gate_params).c_str(),
                      std::to_string(r.flops).c_str(), fixed6(r.relmac_p).c_str(),
                      fixed6(r.relmac_g).c_str());
        out << line;
      }
      out << "(compute columns are proxies, not latency";
      double wall = 0.0;
      for (const auto& r : rows) wall += r.wall_seconds;
      if (wall > 0.0) out << "; total wall " << fixed6(wall) << "s, informational only";
      out << ")\n";
      break;
    }
  }
  return out.str();
}

void emit_report(const std::vector<ComparisonRow>& rows, ReportFormat format,
                 const std::string& path) {
  const std::string text = render_report(rows, format);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw IoError("short write to " + path);
}

std::string render_pareto_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << "model,accuracy_pct,one_minus_relmac_g\n";
  for (const auto& r : rows) {
    if (r.failed) continue;
    out << r.model << ',' << fixed6(r.accuracy_pct) << ',' << fixed6(1.0 - r.relmac_g) << "\n";
  }
  return out.str();
}

std::string run_record_to_json_line(const RunRecord& rec) {
  json obj;
  obj["epoch"] = rec.epoch;
  obj["task_loss"] = rec.task_loss;
  obj["gate_penalty"] = rec.gate_penalty;
  obj["objective"] = rec.objective;
  obj["lambda_g"] = rec.lambda_g;
  obj["tau"] = rec.tau;
  obj["theta"] = rec.theta;
  obj["alpha_p"] = rec.alpha_p;
  obj["alpha_g"] = rec.alpha_g;
  obj["rho"] = rec.rho;
  obj["relmac_p"] = rec.relmac_p;
  obj["relmac_g"] = rec.relmac_g;
  obj["relmac_fuse_g"] = rec.relmac_fuse_g;
  obj["train_accuracy"] = rec.train_accuracy;
  obj["val_accuracy"] = rec.val_accuracy;
  obj["collapse_flag_a"] = rec.collapse_flag_a;
  obj["collapse_flag_b"] = rec.collapse_flag_b;
  obj["rewire_events"] = rec.rewire_events;
  return obj.dump();
}

void write_metrics_jsonl(const std::vector<RunRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const auto& rec : records) out << run_record_to_json_line(rec) << "\n";
  if (!out) throw IoError("short write to " + path);
}

std::vector<RunRecord> read_metrics_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<RunRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path + ": " + e.what());
    }
    RunRecord rec;
    rec.epoch = obj.value("epoch", std::size_t{0});
    rec.task_loss = obj.value("task_loss", 0.0);
    rec.gate_penalty = obj.value("gate_penalty", 0.0);
    rec.objective = obj.value("objective", 0.0);
    rec.lambda_g = obj.value("lambda_g", 0.0);
    rec.tau = obj.value("tau", 0.0);
    rec.theta = obj.value("theta", 0.0);
    rec.alpha_p = obj.value("alpha_p", std::vector<double>{});
    rec.alpha_g = obj.value("alpha_g", std::vector<double>{});
    rec.rho = obj.value("rho", std::vector<double>{});
    rec.relmac_p = obj.value("relmac_p", 1.0);
    rec.relmac_g = obj.value("relmac_g", 1.0);
    rec.relmac_fuse_g = obj.value("relmac_fuse_g", 1.0);
    rec.train_accuracy = obj.value("train_accuracy", 0.0);
    rec.val_accuracy = obj.value("val_accuracy", 0.0);
    rec.collapse_flag_a = obj.value("collapse_flag_a", false);
    rec.collapse_flag_b = obj.value("collapse_flag_b", false);
    rec.rewire_events = obj.value("rewire_events", std::size_t{0});
    records.push_back(std::move(rec));
  }
  return records;
}

std::string serialize_run_summary(const RunSummary& s) {
  json obj;
  obj["variant"] = s.variant;
  obj["seed"] = s.seed;
  obj["dims"] = s.dims;
  obj["test_accuracy"] = s.test_accuracy;
  obj["params"] = s.params;
  obj["gate_params"] = s.gate_params;
  obj["flops_dense"] = s.flops_dense;
  obj["relmac_p"] = s.relmac_p;
  obj["relmac_g"] = s.relmac_g;
  obj["rho"] = s.rho;
  obj["aborted"] = s.aborted;
  obj["abort_reason"] = s.abort_reason;
  obj["wall_seconds_informational"] = s.wall_seconds;
  return obj.dump(2) + "\n";
}

RunSummary parse_run_summary(const std::string& json_text) {
  json obj;
  try {
    obj = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("summary: ") + e.what());
  }
  RunSummary s;
  s.variant = obj.value("variant", std::string{});
  s.seed = obj.value("seed", std::uint64_t{0});
  s.dims = obj.value("dims", std::vector<std::size_t>{});
  s.test_accuracy = obj.value("test_accuracy", 0.0);
  s.params = obj.value("params", std::int64_t{0});
  s.gate_params = obj.value("gate_params", std::int64_t{0});
  s.flops_dense = obj.value("flops_dense", std::int64_t{0});
  s.relmac_p = obj.value("relmac_p", 1.0);
  s.relmac_g = obj.value("relmac_g", 1.0);
  s.rho = obj.value("rho", std::vector<double>{});
  s.aborted = obj.value("aborted", false);
  s.abort_reason = obj.value("abort_reason", std::string{});
  s.wall_seconds = obj.value("wall_seconds_informational", 0.0);
  return s;
}

RunSummary load_run_summary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_run_summary(text);
}

ComparisonRow summary_to_row(const RunSummary& s) {
  ComparisonRow row;
  row.model = s.variant;
  row.accuracy_pct = s.test_accuracy * 100.0;
  row.param_reduction_pct = 0.0;  // mask-style sparsity: parameters stay in place
  row.flops_reduction_pct = 100.0 * (1.0 - s.relmac_g);
  row.params = s.params + s.gate_params;
  row.gate_params = s.gate_params;
  row.flops = static_cast<std::int64_t>(
      std::llround(static_cast<double>(s.flops_dense) * s.relmac_g));
  row.relmac_p = s.relmac_p;
  row.relmac_g = s.relmac_g;
  std::ostringstream rho;
  for (std::size_t i = 0; i < s.rho.size(); ++i) {
    if (i) rho << '|';
    rho << fixed6(s.rho[i]);
  }
  row.rho_summary = rho.str();
  row.wall_seconds = s.wall_seconds;
  row.failed = s.aborted;
  row.error = s.abort_reason;
  return row;
}

ComparisonRow aggregate_rows(const std::vector<ComparisonRow>& rows) {
  if (rows.empty()) throw ValidationError("aggregate_rows: no rows");
  ComparisonRow agg = rows.front();
  if (rows.size() == 1) return agg;
  double mean = 0.0;
  for (const auto& r : rows) mean += r.accuracy_pct;
  mean /= static_cast<double>(rows.size());
  double var = 0.0;
  for (const auto& r : rows) {
    const double d = r.accuracy_pct - mean;
    var += d * d;
  }
  var /= static_cast<double>(rows.size());
  agg.accuracy_pct = mean;
  agg.accuracy_std = std::sqrt(var);

  auto mean_of = [&rows](auto getter) {
    double m = 0.0;
    for (const auto& r : rows) m += getter(r);
    return m / static_cast<double>(rows.size());
  };
  agg.flops_reduction_pct = mean_of([](const ComparisonRow& r) { return r.flops_reduction_pct; });
  agg.relmac_p = mean_of([](const ComparisonRow& r) { return r.relmac_p; });
  agg.relmac_g = mean_of([](const ComparisonRow& r) { return r.relmac_g; });
  agg.flops = static_cast<std::int64_t>(mean_of([](const ComparisonRow& r) {
    return static_cast<double>(r.flops);
  }));
  agg.wall_seconds = mean_of([](const ComparisonRow& r) { return r.wall_seconds; });
  for (const auto& r : rows) agg.failed = agg.failed || r.failed;
  return agg;
}

}  // namespace gatednet
