#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gatednet/trainer.hpp"

namespace gatednet {

// One comparison-table row (Table-2 style plus RelMAC columns).
struct ComparisonRow {
  std::string model;
  double accuracy_pct = 0.0;
  double accuracy_std = 0.0;       // over seed sweeps; 0 for a single seed
  double param_reduction_pct = 0.0;  // mask-style sparsity removes nothing: 0.0
  double flops_reduction_pct = 0.0;  // always 100 * (1 - relmac_g)
  std::int64_t params = 0;           // including gate parameters
  std::int64_t gate_params = 0;
  std::int64_t flops = 0;            // round(dense flops * relmac_g)
  double relmac_p = 1.0;
  double relmac_g = 1.0;             // deployment RelMAC with mask density folded in
  std::string rho_summary;           // per-layer densities joined by '|'
  double wall_seconds = 0.0;         // informational only, never normative
  bool failed = false;
  std::string error;
};

enum class ReportFormat { kCsv, kJsonl, kTable };
std::optional<ReportFormat> report_format_from_name(const std::string& name);

// Documented CSV schema; the header line is exactly this string.
extern const char* const kComparisonCsvHeader;

// Renders rows in the requested format: CSV with the documented header,
// JSONL with sorted keys (one object per line), or an aligned text table.
// Numbers print with 6-decimal fixed precision in csv/table. Throws
// ValidationError on an empty row list.
std::string render_report(const std::vector<ComparisonRow>& rows, ReportFormat format);

// render_report to a file; throws IoError when the path is unwritable.
void emit_report(const std::vector<ComparisonRow>& rows, ReportFormat format,
                 const std::string& path);

// Accuracy-vs-compute points in the spirit of a Pareto sweep.
std::string render_pareto_csv(const std::vector<ComparisonRow>& rows);

// --- per-epoch metrics sink ---------------------------------------------

// One RunRecord per line as JSON with sorted keys and round-trip-exact
// numbers; identical runs serialize byte-identically.
std::string run_record_to_json_line(const RunRecord& rec);
void write_metrics_jsonl(const std::vector<RunRecord>& records, const std::string& path);
std::vector<RunRecord> read_metrics_jsonl(const std::string& path);

// Run summary written beside metrics.jsonl; holds everything a comparison
// row needs so `report` can re-render without retraining.
struct RunSummary {
  std::string variant;
  std::uint64_t seed = 0;
  std::vector<std::size_t> dims;
  double test_accuracy = 0.0;
  std::int64_t params = 0;
  std::int64_t gate_params = 0;
  std::int64_t flops_dense = 0;
  double relmac_p = 1.0;
  double relmac_g = 1.0;
  std::vector<double> rho;
  bool aborted = false;
  std::string abort_reason;
  double wall_seconds = 0.0;  // informational
};

std::string serialize_run_summary(const RunSummary& s);
RunSummary parse_run_summary(const std::string& json_text);
RunSummary load_run_summary(const std::string& path);

ComparisonRow summary_to_row(const RunSummary& s);

// Aggregates per-seed rows of one variant into a mean +/- std row.
ComparisonRow aggregate_rows(const std::vector<ComparisonRow>& rows);

}  // namespace gatednet
