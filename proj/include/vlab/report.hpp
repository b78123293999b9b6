#pragma once

#include <optional>

#include "vlab/csv.hpp"
#include "vlab/train.hpp"

namespace vlab {

struct ClassReport {
  std::string model_name;
  std::vector<std::string> class_names;
  std::vector<double> accuracy;  // percent, aligned with class_names
  double top1 = 0;
  double top5 = 0;
  int64_t epoch = 0;
  double params_millions = 0;
};

struct VariantComparison {
  std::string variant_name;
  int64_t no_inc = 0;  // classes strictly above the backbone's accuracy
  std::string highest_increase_class;
  double highest_increase_delta = 0;
  std::string lowest_decrease_class;  // the most negative delta
  double lowest_decrease_delta = 0;
  std::string least_class;  // the variant's own minimum
  double least_acc = 0;
};

/// Delta analysis of a variant against its backbone; extrema ties resolve to
/// the lexicographically first class name.
VariantComparison compare(const ClassReport& backbone, const ClassReport& variant);

/// The k lowest-accuracy classes, ascending, lexicographic tie-break.
std::vector<std::pair<std::string, double>> worst_k(const ClassReport& report, int64_t k);

ClassReport classreport_from_metrics(const std::string& model_name, const Metrics& metrics,
                                     const std::vector<std::string>& class_names, int64_t epoch,
                                     double params_millions);

void write_classreport_csv(const std::filesystem::path& path, const ClassReport& report,
                           const std::vector<std::string>& header_comments);
ClassReport read_classreport_csv(const std::filesystem::path& path);

// ---- comparison table -------------------------------------------------------------

struct TableRow {
  ClassReport report;
  std::optional<VariantComparison> comparison;  // absent for the backbone row
};

inline const char* kTableCsvHeader =
    "variant,epoch,params_millions,top1,top5,no_inc,highest_increase_class,highest_increase_delta,"
    "lowest_decrease_class,lowest_decrease_delta,least_class,least_acc";

void emit_table_csv(const std::filesystem::path& path, const std::vector<TableRow>& rows,
                    const std::vector<std::string>& header_comments);

// ---- chart ------------------------------------------------------------------------

/// Grouped bar chart (one group per class, one bar per series) as standalone
/// SVG 1.1; byte-deterministic for identical input.
void emit_chart_svg(const std::filesystem::path& path, const std::vector<std::string>& class_names,
                    const std::vector<std::string>& series_names,
                    const std::vector<std::vector<double>>& accuracy,  // [series][class]
                    const std::string& title, const std::vector<std::string>& header_comments);

// ---- reference verification ----------------------------------------------------------

struct VerifyDiff {
  std::string row_key;
  std::string column;
  std::string expected;
  std::string actual;
  bool documented = false;
};

struct VerifyResult {
  bool pass = false;            // no diffs at all
  bool documented_only = false;  // every diff is a documented discrepancy
  std::vector<VerifyDiff> diffs;
};

/// Compares an emitted CSV against a shipped reference. Rows match on the
/// `variant` column. Parameter totals compare within `params_tol` (millions);
/// accuracy columns compare only for rows not flagged audit_only. A reference
/// note `expected_params=X` turns a params mismatch into a documented
/// discrepancy when the emitted value agrees with X.
VerifyResult verify_against_reference(const std::filesystem::path& emitted_csv,
                                      const std::filesystem::path& reference_csv,
                                      double params_tol = 0.01, double accuracy_tol = 0.5);

}  // namespace vlab
