#include <CLI11.hpp>

#include <iostream>

#include "vlab/config.hpp"
#include "vlab/report.hpp"

namespace {

using namespace vlab;

constexpr int kExitOk = 0;
constexpr int kExitUnexpectedDiff = 1;
constexpr int kExitDocumentedDiff = 2;
constexpr int kExitMissingData = 3;
constexpr int kExitNumeric = 4;

std::vector<std::string> artifact_header(const RunConfig& cfg) {
  return cfg.header_lines();
}

std::filesystem::path family_out_path(const std::filesystem::path& base, const std::string& family,
                                      bool single) {
  if (single) return base;
  std::filesystem::path p = base;
  const std::string stem = p.stem().string();
  const std::string ext = p.extension().string();
  return p.parent_path() / (stem + "_" + family + ext);
}

int cmd_audit(const RunConfig& cfg, const std::string& family, const std::filesystem::path& out,
              const std::filesystem::path& reference_dir) {
  std::vector<std::string> families;
  if (family == "all") families = {"mc3", "r2plus1d", "r3d"};
  else families = {family};

  bool any_unexpected = false, any_documented = false;
  for (const std::string& fam : families) {
    ModelConfig mc = cfg.model_config();
    mc.backbone = parse_backbone(fam);
    std::vector<TableRow> rows;
    std::vector<std::string> totals;
    for (Variant v : all_variants()) {
      mc.variant = v;
      ModelT<float> model = build_model<float>(mc, cfg.seed());
      ParamAudit audit = param_audit(model);
      TableRow row;
      row.report.model_name = to_string(v);
      row.report.params_millions = audit.millions;
      rows.push_back(std::move(row));
      totals.push_back("params_total." + std::string(to_string(v)) + "=" + std::to_string(audit.total));
      std::cout << fam << " " << to_string(v) << ": " << audit.total << " params ("
                << audit.millions << "M)\n";
    }
    const std::filesystem::path out_path = family_out_path(out, fam, families.size() == 1);
    auto header = artifact_header(cfg);
    header.push_back("audit_family=" + fam);
    header.insert(header.end(), totals.begin(), totals.end());
    emit_table_csv(out_path, rows, header);

    const std::filesystem::path ref = reference_dir / (fam + "_family.csv");
    if (!std::filesystem::exists(ref)) {
      std::cerr << "reference table missing: " << ref << "\n";
      return kExitMissingData;
    }
    VerifyResult vr = verify_against_reference(out_path, ref);
    for (const auto& d : vr.diffs)
      std::cout << (d.documented ? "documented diff " : "UNEXPECTED diff ") << fam << "/" << d.row_key
                << " " << d.column << ": reference " << d.expected << " vs audited " << d.actual
                << "\n";
    if (!vr.pass && !vr.documented_only) any_unexpected = true;
    else if (!vr.pass) any_documented = true;
    std::cout << fam << " audit vs reference: "
              << (vr.pass ? "pass" : vr.documented_only ? "documented discrepancies only" : "FAIL")
              << "\n";
  }
  if (any_unexpected) return kExitUnexpectedDiff;
  if (any_documented) return kExitDocumentedDiff;
  return kExitOk;
}

int cmd_synth(const RunConfig& cfg, const std::filesystem::path& out, int64_t classes,
              int64_t per_class, int64_t val_per_class, int64_t side, int64_t frames) {
  SynthConfig sc;
  sc.classes = classes;
  sc.per_class = per_class;
  sc.side = side;
  sc.frames = frames;
  sc.seed = cfg.seed();
  auto header = artifact_header(cfg);

  sc.split_name = "train";
  synth_motion_dataset(out, sc, header);
  if (val_per_class > 0) {
    sc.split_name = "val";
    sc.per_class = val_per_class;
    synth_motion_dataset(out, sc, header);
  }
  std::cout << "wrote synthetic dataset to " << out << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, const std::filesystem::path& train_manifest,
              const std::filesystem::path& val_manifest, const std::filesystem::path& out_dir) {
  if (!std::filesystem::exists(train_manifest) || !std::filesystem::exists(val_manifest)) {
    std::cerr << "manifest missing: " << (std::filesystem::exists(train_manifest) ? val_manifest : train_manifest)
              << "\n";
    return kExitMissingData;
  }
  auto train_data = load_dataset(train_manifest);
  auto val_data = load_dataset(val_manifest);

  ModelConfig mc = cfg.model_config();
  ModelT<float> model = build_model<float>(mc, cfg.seed());
  std::cout << "built " << to_string(mc.backbone) << "/" << to_string(mc.variant) << " with "
            << param_audit(model).total << " params\n";

  std::filesystem::create_directories(out_dir);
  TrainResult result = train_loop(model, train_data, val_data, cfg.train_config(),
                                  cfg.pipeline_config(), cfg.seed(), [](const EpochLog& e) {
                                    std::cout << "epoch " << e.epoch << " lr " << e.lr << " loss "
                                              << e.train_loss << " val top1 " << e.val_top1
                                              << " top5 " << e.val_top5
                                              << (e.stopped_early ? " (early stop)" : "") << "\n";
                                  });

  auto header = artifact_header(cfg);
  header.push_back("best_epoch=" + std::to_string(result.best_epoch));
  write_epoch_log_csv(out_dir / "epochs.csv", result.log, header);
  std::string extra = "tool=vlab " + std::string(kToolVersion) + "\n" +
                      "seed=" + std::to_string(cfg.seed()) + "\n" +
                      "best_epoch=" + std::to_string(result.best_epoch) + "\n";
  checkpoint_save(model, out_dir / "best.ckpt", extra);
  std::cout << "best epoch " << result.best_epoch << " val top1 " << result.best_val_top1 << "\n";
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint,
             const std::filesystem::path& manifest, const std::filesystem::path& out_csv,
             const std::string& model_name) {
  if (!std::filesystem::exists(manifest)) {
    std::cerr << "manifest missing: " << manifest << "\n";
    return kExitMissingData;
  }
  ModelConfig mc = read_checkpoint_config(checkpoint);
  ModelT<float> model = checkpoint_load<float>(checkpoint, mc);
  auto data = load_dataset(manifest);
  SplitManifest man = load_manifest(manifest);

  Metrics metrics = evaluate(model, data, cfg.pipeline_config(), mc.classes, Rng(cfg.seed()).split(3));
  std::vector<std::string> class_names = man.class_names;
  if (int64_t(class_names.size()) != mc.classes) {
    class_names.clear();
    for (int64_t c = 0; c < mc.classes; ++c) class_names.push_back("class" + std::to_string(c));
  }
  std::string name = model_name.empty()
                         ? std::string(to_string(mc.backbone)) + "/" + to_string(mc.variant)
                         : model_name;
  ClassReport report = classreport_from_metrics(name, metrics, class_names, 0,
                                                param_audit(model).millions);
  write_classreport_csv(out_csv, report, artifact_header(cfg));
  std::cout << name << " top1 " << metrics.top1 << " top5 " << metrics.top5 << "\n";
  return kExitOk;
}

int cmd_report(const RunConfig& cfg, const std::filesystem::path& backbone_csv,
               const std::vector<std::filesystem::path>& variant_csvs,
               const std::filesystem::path& out_csv, const std::filesystem::path& chart_svg,
               int64_t chart_k) {
  ClassReport backbone = read_classreport_csv(backbone_csv);
  std::vector<TableRow> rows;
  rows.push_back({backbone, std::nullopt});
  std::vector<ClassReport> variants;
  for (const auto& p : variant_csvs) {
    ClassReport v = read_classreport_csv(p);
    rows.push_back({v, compare(backbone, v)});
    variants.push_back(std::move(v));
  }
  emit_table_csv(out_csv, rows, artifact_header(cfg));

  if (!chart_svg.empty()) {
    // five worst backbone classes across all runs, ascending accuracy
    auto worst = worst_k(backbone, std::min<int64_t>(chart_k, int64_t(backbone.class_names.size())));
    std::vector<std::string> class_names;
    for (const auto& [name, _] : worst) class_names.push_back(name);
    std::vector<std::string> series;
    std::vector<std::vector<double>> acc;
    auto row_for = [&](const ClassReport& r) {
      std::vector<double> out;
      for (const auto& cn : class_names) {
        double v = 0;
        for (size_t i = 0; i < r.class_names.size(); ++i)
          if (r.class_names[i] == cn) v = r.accuracy[i];
        out.push_back(v);
      }
      return out;
    };
    series.push_back(backbone.model_name);
    acc.push_back(row_for(backbone));
    for (const auto& v : variants) {
      series.push_back(v.model_name);
      acc.push_back(row_for(v));
    }
    emit_chart_svg(chart_svg, class_names, series, acc,
                   "Most misclassified classes of " + backbone.model_name, artifact_header(cfg));
  }
  std::cout << "wrote " << out_csv << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vlab: spatiotemporal attention-variant laboratory"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags (--seed, --set, --config) may follow the subcommand

  vlab::RunConfig cfg;
  std::string config_file;
  app.add_option("--config", config_file, "key=value configuration file");
  std::vector<std::string> overrides;
  app.add_option("--set", overrides, "override a config key, key=value")->take_all();
  int64_t seed = -1;
  app.add_option("--seed", seed, "run seed (all randomness derives from it)");

  // audit
  auto* audit = app.add_subcommand("audit", "build the architecture family and audit parameter counts");
  std::string family = "all";
  audit->add_option("--family", family, "mc3 | r2plus1d | r3d | all")->default_val("all");
  int64_t audit_classes = 101;
  audit->add_option("--classes", audit_classes, "classifier classes")->default_val(101);
  std::string audit_out = "audit.csv";
  audit->add_option("--out", audit_out, "output CSV path");
  std::string reference_dir = "data/reference";
  audit->add_option("--reference", reference_dir, "directory of shipped reference tables");

  // synth
  auto* synth = app.add_subcommand("synth", "generate the synthetic motion dataset");
  std::string synth_out = "synth-data";
  int64_t classes = 4, per_class = 50, val_per_class = 20, side = 32, frames = 12;
  synth->add_option("--out", synth_out, "output directory");
  synth->add_option("--classes", classes, "number of direction classes (4)");
  synth->add_option("--per-class", per_class, "training videos per class");
  synth->add_option("--val-per-class", val_per_class, "validation videos per class (0 to skip)");
  synth->add_option("--side", side, "frame side length");
  synth->add_option("--frames", frames, "frames per video");

  // train
  auto* train = app.add_subcommand("train", "train a model on a manifest dataset");
  std::string train_manifest, val_manifest, train_out = "run";
  std::string backbone_flag, variant_flag;
  double scale_flag = -1;
  int64_t frames_flag = -1, side_flag = -1;
  train->add_option("--train-manifest", train_manifest, "training manifest")->required();
  train->add_option("--val-manifest", val_manifest, "validation manifest")->required();
  train->add_option("--out", train_out, "output directory (checkpoint + epoch log)");
  int64_t train_classes = -1;
  train->add_option("--classes", train_classes, "classifier classes (match the dataset)");
  train->add_option("--backbone", backbone_flag, "r3d | mc3 | r2plus1d");
  train->add_option("--variant", variant_flag, "backbone | fc-spatial | ... | all-together");
  train->add_option("--scale", scale_flag, "width scale (1 = full)");
  train->add_option("--frames", frames_flag, "clip length in frames");
  train->add_option("--side", side_flag, "input side length");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint with the three-clip protocol");
  std::string ckpt, eval_manifest, eval_out = "classreport.csv", eval_name;
  eval_cmd->add_option("--checkpoint", ckpt, "checkpoint path")->required();
  eval_cmd->add_option("--manifest", eval_manifest, "evaluation manifest")->required();
  eval_cmd->add_option("--out", eval_out, "class report CSV");
  eval_cmd->add_option("--name", eval_name, "model name for the report");

  // report
  auto* report = app.add_subcommand("report", "variant-versus-backbone comparison table and chart");
  std::string backbone_run;
  std::vector<std::string> variant_runs;
  std::string report_out = "comparison.csv", chart_out;
  int64_t chart_k = 5;
  report->add_option("--backbone-run", backbone_run, "backbone class-report CSV")->required();
  report->add_option("--variant-runs", variant_runs, "variant class-report CSVs")->delimiter(',');
  report->add_option("--out", report_out, "comparison CSV path");
  report->add_option("--chart", chart_out, "grouped bar chart SVG path");
  report->add_option("--chart-k", chart_k, "number of worst classes to chart");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!config_file.empty()) cfg.load_file(config_file);
    for (const auto& kv : overrides) {
      size_t eq = kv.find('=');
      if (eq == std::string::npos) vlab::fail(vlab::ErrorKind::Config, "--set expects key=value");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed >= 0) cfg.set("seed", std::to_string(seed));

    if (audit->parsed()) {
      cfg.set("model.classes", std::to_string(audit_classes));
      return cmd_audit(cfg, family, audit_out, reference_dir);
    }
    if (synth->parsed()) return cmd_synth(cfg, synth_out, classes, per_class, val_per_class, side, frames);
    if (train->parsed()) {
      if (train_classes > 0) cfg.set("model.classes", std::to_string(train_classes));
      if (!backbone_flag.empty()) cfg.set("model.backbone", backbone_flag);
      if (!variant_flag.empty()) cfg.set("model.variant", variant_flag);
      if (scale_flag > 0) cfg.set("model.width_scale", std::to_string(scale_flag));
      if (frames_flag > 0) {
        cfg.set("model.frames", std::to_string(frames_flag));
        cfg.set("data.clip_len", std::to_string(frames_flag));
      }
      if (side_flag > 0) {
        cfg.set("model.side", std::to_string(side_flag));
        cfg.set("data.crop", std::to_string(side_flag));
        if (cfg.get_int("data.resize") < side_flag) cfg.set("data.resize", std::to_string(side_flag));
      }
      return cmd_train(cfg, train_manifest, val_manifest, train_out);
    }
    if (eval_cmd->parsed()) return cmd_eval(cfg, ckpt, eval_manifest, eval_out, eval_name);
    if (report->parsed()) {
      std::vector<std::filesystem::path> variant_paths(variant_runs.begin(), variant_runs.end());
      return cmd_report(cfg, backbone_run, variant_paths, report_out, chart_out, chart_k);
    }
  } catch (const vlab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case vlab::ErrorKind::Numeric: return kExitNumeric;
      case vlab::ErrorKind::Io:
      case vlab::ErrorKind::Data: return kExitMissingData;
      default: return kExitUnexpectedDiff;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUnexpectedDiff;
  }
  return kExitOk;
}
