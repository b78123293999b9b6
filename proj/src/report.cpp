#include "vlab/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "vlab/serialize.hpp"

namespace vlab {

namespace {

std::string fmt2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::map<std::string, double> by_class(const ClassReport& r) {
  if (r.class_names.size() != r.accuracy.size())
    fail(ErrorKind::Report, "class report '" + r.model_name + "' has misaligned names/accuracies");
  std::map<std::string, double> m;
  for (size_t i = 0; i < r.class_names.size(); ++i) m[r.class_names[i]] = r.accuracy[i];
  return m;
}

}  // namespace

VariantComparison compare(const ClassReport& backbone, const ClassReport& variant) {
  auto base = by_class(backbone);
  auto var = by_class(variant);
  if (base.size() != var.size() ||
      !std::equal(base.begin(), base.end(), var.begin(),
                  [](const auto& a, const auto& b) { return a.first == b.first; })) {
    std::set<std::string> b_only, v_only;
    for (const auto& [k, _] : base)
      if (!var.count(k)) b_only.insert(k);
    for (const auto& [k, _] : var)
      if (!base.count(k)) v_only.insert(k);
    std::string msg = "class sets differ;";
    for (const auto& k : b_only) msg += " backbone-only:" + k;
    for (const auto& k : v_only) msg += " variant-only:" + k;
    fail(ErrorKind::Report, msg);
  }

  VariantComparison c;
  c.variant_name = variant.model_name;
  bool first = true;
  for (const auto& [name, base_acc] : base) {  // map iterates in lexicographic order
    const double var_acc = var[name];
    const double delta = var_acc - base_acc;
    if (delta > 0) ++c.no_inc;
    if (first || delta > c.highest_increase_delta) {
      c.highest_increase_class = name;
      c.highest_increase_delta = delta;
    }
    if (first || delta < c.lowest_decrease_delta) {
      c.lowest_decrease_class = name;
      c.lowest_decrease_delta = delta;
    }
    if (first || var_acc < c.least_acc) {
      c.least_class = name;
      c.least_acc = var_acc;
    }
    first = false;
  }
  return c;
}

std::vector<std::pair<std::string, double>> worst_k(const ClassReport& report, int64_t k) {
  if (k < 0 || size_t(k) > report.class_names.size())
    fail(ErrorKind::Report, "worst_k k out of range");
  std::vector<std::pair<std::string, double>> all;
  for (size_t i = 0; i < report.class_names.size(); ++i)
    all.emplace_back(report.class_names[i], report.accuracy[i]);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second < b.second;
    return a.first < b.first;
  });
  all.resize(size_t(k));
  return all;
}

ClassReport classreport_from_metrics(const std::string& model_name, const Metrics& metrics,
                                     const std::vector<std::string>& class_names, int64_t epoch,
                                     double params_millions) {
  if (class_names.size() != metrics.per_class.size())
    fail(ErrorKind::Report, "class name count does not match metrics");
  ClassReport r;
  r.model_name = model_name;
  r.class_names = class_names;
  r.accuracy = metrics.per_class;
  r.top1 = metrics.top1;
  r.top5 = metrics.top5;
  r.epoch = epoch;
  r.params_millions = params_millions;
  return r;
}

void write_classreport_csv(const std::filesystem::path& path, const ClassReport& report,
                           const std::vector<std::string>& header_comments) {
  AtomicFile file(path);
  std::ostream& os = file.stream();
  for (const auto& c : header_comments) os << "# " << c << "\n";
  os << "# model=" << report.model_name << "\n";
  os << "# top1=" << fmt2(report.top1) << "\n";
  os << "# top5=" << fmt2(report.top5) << "\n";
  os << "# epoch=" << report.epoch << "\n";
  os << "# params_millions=" << fmt2(report.params_millions) << "\n";
  os << "class,accuracy\n";
  for (size_t i = 0; i < report.class_names.size(); ++i)
    os << report.class_names[i] << "," << fmt2(report.accuracy[i]) << "\n";
  file.commit();
}

ClassReport read_classreport_csv(const std::filesystem::path& path) {
  CsvTable t = read_csv(path);
  ClassReport r;
  for (const auto& c : t.comments) {
    auto grab = [&](const std::string& key) -> std::optional<std::string> {
      const std::string prefix = "# " + key + "=";
      if (c.rfind(prefix, 0) == 0) return c.substr(prefix.size());
      return std::nullopt;
    };
    if (auto v = grab("model")) r.model_name = *v;
    if (auto v = grab("top1")) r.top1 = std::stod(*v);
    if (auto v = grab("top5")) r.top5 = std::stod(*v);
    if (auto v = grab("epoch")) r.epoch = std::stoll(*v);
    if (auto v = grab("params_millions")) r.params_millions = std::stod(*v);
  }
  const int64_t class_col = t.require_col("class");
  const int64_t acc_col = t.require_col("accuracy");
  for (const auto& row : t.rows) {
    r.class_names.push_back(row[size_t(class_col)]);
    r.accuracy.push_back(std::stod(row[size_t(acc_col)]));
  }
  return r;
}

void emit_table_csv(const std::filesystem::path& path, const std::vector<TableRow>& rows,
                    const std::vector<std::string>& header_comments) {
  if (rows.empty()) fail(ErrorKind::Report, "no rows to emit");
  AtomicFile file(path);
  std::ostream& os = file.stream();
  for (const auto& c : header_comments) os << "# " << c << "\n";
  os << kTableCsvHeader << "\n";
  for (const auto& row : rows) {
    os << row.report.model_name << "," << row.report.epoch << "," << fmt2(row.report.params_millions)
       << "," << fmt2(row.report.top1) << "," << fmt2(row.report.top5) << ",";
    if (row.comparison) {
      const auto& c = *row.comparison;
      os << c.no_inc << "," << c.highest_increase_class << "," << fmt2(c.highest_increase_delta) << ","
         << c.lowest_decrease_class << "," << fmt2(c.lowest_decrease_delta) << "," << c.least_class
         << "," << fmt2(c.least_acc);
    } else {
      // the backbone row carries no self-comparison; still report its minimum
      std::string least = "N/A";
      double least_acc = 0;
      if (!row.report.class_names.empty()) {
        auto w = worst_k(row.report, 1);
        least = w[0].first;
        least_acc = w[0].second;
      }
      os << "N/A,N/A,N/A,N/A,N/A," << least << "," << (least == "N/A" ? "N/A" : fmt2(least_acc));
    }
    os << "\n";
  }
  file.commit();
}

void emit_chart_svg(const std::filesystem::path& path, const std::vector<std::string>& class_names,
                    const std::vector<std::string>& series_names,
                    const std::vector<std::vector<double>>& accuracy, const std::string& title,
                    const std::vector<std::string>& header_comments) {
  if (accuracy.size() != series_names.size())
    fail(ErrorKind::Report, "chart matrix rows must match series count");
  for (const auto& row : accuracy)
    if (row.size() != class_names.size())
      fail(ErrorKind::Report, "chart matrix columns must match class count");

  static const char* kPalette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860",
                                   "#da8bc3", "#8c8c8c", "#ccb974", "#64b5cd", "#2f4b7c"};
  const size_t palette_n = sizeof(kPalette) / sizeof(kPalette[0]);

  const double bar_w = 12.0, bar_gap = 2.0, group_gap = 24.0;
  const double plot_h = 300.0, margin_l = 60.0, margin_t = 48.0, margin_b = 90.0;
  const double group_w = double(series_names.size()) * (bar_w + bar_gap) + group_gap;
  const double plot_w = group_w * double(class_names.size());
  const double legend_w = 170.0;
  const double width = margin_l + plot_w + legend_w;
  const double height = margin_t + plot_h + margin_b;

  std::ostringstream os;
  char buf[256];
  auto f2 = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };

  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  for (const auto& c : header_comments) os << "<!-- " << c << " -->\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << f2(width)
     << "\" height=\"" << f2(height) << "\" viewBox=\"0 0 " << f2(width) << " " << f2(height)
     << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << f2(width) << "\" height=\"" << f2(height)
     << "\" fill=\"#ffffff\"/>\n";
  os << "<text x=\"" << f2(margin_l) << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">"
     << title << "</text>\n";

  // y axis: 0..100 percent, ticks every 20
  for (int tick = 0; tick <= 100; tick += 20) {
    const double y = margin_t + plot_h - plot_h * double(tick) / 100.0;
    os << "<line x1=\"" << f2(margin_l) << "\" y1=\"" << f2(y) << "\" x2=\"" << f2(margin_l + plot_w)
       << "\" y2=\"" << f2(y) << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    os << "<text x=\"" << f2(margin_l - 8.0) << "\" y=\"" << f2(y + 4.0)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << tick << "</text>\n";
  }

  for (size_t ci = 0; ci < class_names.size(); ++ci) {
    const double gx = margin_l + group_w * double(ci) + group_gap / 2.0;
    for (size_t si = 0; si < series_names.size(); ++si) {
      const double acc = accuracy[si][ci];
      const double h = plot_h * acc / 100.0;
      const double x = gx + double(si) * (bar_w + bar_gap);
      const double y = margin_t + plot_h - h;
      os << "<rect class=\"bar\" x=\"" << f2(x) << "\" y=\"" << f2(y) << "\" width=\"" << f2(bar_w)
         << "\" height=\"" << f2(h) << "\" fill=\"" << kPalette[si % palette_n] << "\"/>\n";
    }
    const double label_x = gx + (group_w - group_gap) / 2.0;
    const double label_y = margin_t + plot_h + 14.0;
    os << "<text x=\"" << f2(label_x) << "\" y=\"" << f2(label_y)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" transform=\"rotate(-35 "
       << f2(label_x) << " " << f2(label_y) << ")\">" << class_names[ci] << "</text>\n";
  }

  for (size_t si = 0; si < series_names.size(); ++si) {
    const double lx = margin_l + plot_w + 16.0;
    const double ly = margin_t + 16.0 * double(si);
    os << "<rect x=\"" << f2(lx) << "\" y=\"" << f2(ly) << "\" width=\"10\" height=\"10\" fill=\""
       << kPalette[si % palette_n] << "\"/>\n";
    os << "<text x=\"" << f2(lx + 14.0) << "\" y=\"" << f2(ly + 9.0)
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << series_names[si] << "</text>\n";
  }
  os << "</svg>\n";

  AtomicFile file(path);
  file.stream() << os.str();
  file.commit();
}

VerifyResult verify_against_reference(const std::filesystem::path& emitted_csv,
                                      const std::filesystem::path& reference_csv, double params_tol,
                                      double accuracy_tol) {
  CsvTable emitted = read_csv(emitted_csv);
  CsvTable ref = read_csv(reference_csv);
  const int64_t e_key = emitted.require_col("variant");
  const int64_t e_params = emitted.require_col("params_millions");
  const int64_t r_key = ref.require_col("variant");
  const int64_t r_params = ref.require_col("params_millions");
  const int64_t r_audit_only = ref.require_col("audit_only");
  const int64_t r_note = ref.col("note");

  std::map<std::string, const std::vector<std::string>*> emitted_rows;
  for (const auto& row : emitted.rows) emitted_rows[row[size_t(e_key)]] = &row;

  VerifyResult res;
  auto add_diff = [&](const std::string& key, const std::string& col, const std::string& expect,
                      const std::string& got, bool documented) {
    res.diffs.push_back({key, col, expect, got, documented});
  };

  for (const auto& rrow : ref.rows) {
    const std::string& key = rrow[size_t(r_key)];
    auto it = emitted_rows.find(key);
    if (it == emitted_rows.end()) {
      add_diff(key, "variant", key, "<missing row>", false);
      continue;
    }
    const auto& erow = *it->second;

    const double want = std::stod(rrow[size_t(r_params)]);
    const double got = std::stod(erow[size_t(e_params)]);
    if (std::abs(want - got) > params_tol + 1e-9) {
      bool documented = false;
      if (r_note >= 0) {
        const std::string& note = rrow[size_t(r_note)];
        const std::string tag = "expected_params=";
        size_t pos = note.find(tag);
        if (pos != std::string::npos) {
          const double expected = std::stod(note.substr(pos + tag.size()));
          if (std::abs(expected - got) <= params_tol + 1e-9) documented = true;
        }
      }
      add_diff(key, "params_millions", rrow[size_t(r_params)], erow[size_t(e_params)], documented);
    }

    const bool audit_only = rrow[size_t(r_audit_only)] != "0";
    if (!audit_only) {
      for (const char* col : {"top1", "top5"}) {
        const int64_t rc = ref.col(col), ec = emitted.col(col);
        if (rc < 0 || ec < 0) fail(ErrorKind::Report, std::string("missing column '") + col + "'");
        const double rv = std::stod(rrow[size_t(rc)]);
        const double ev = std::stod(erow[size_t(ec)]);
        if (std::abs(rv - ev) > accuracy_tol + 1e-9)
          add_diff(key, col, rrow[size_t(rc)], erow[size_t(ec)], false);
      }
    }
  }

  res.pass = res.diffs.empty();
  res.documented_only =
      !res.pass && std::all_of(res.diffs.begin(), res.diffs.end(), [](const VerifyDiff& d) {
        return d.documented;
      });
  return res;
}

}  // namespace vlab
