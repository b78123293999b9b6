#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "vlab/report.hpp"

using namespace vlab;

namespace {

std::string g_cli;
const std::filesystem::path kRefDir = std::filesystem::path(VLAB_SOURCE_DIR) / "data" / "reference";

std::filesystem::path work_dir() {
  auto p = std::filesystem::temp_directory_path() / "vlab_cli_test";
  std::filesystem::create_directories(p);
  return p;
}

int run(const std::string& args, std::string* output = nullptr) {
  const std::filesystem::path log = work_dir() / "out.log";
  const std::string cmd = g_cli + " " + args + " > " + log.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  if (output) {
    std::ifstream is(log);
    std::ostringstream os;
    os << is.rdbuf();
    *output = os.str();
  }
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)), {});
}

}  // namespace

TEST_CASE("synth is byte-deterministic for a fixed seed") {
  auto base = work_dir();
  auto d1 = base / "synth1";
  auto d2 = base / "synth2";
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
  REQUIRE(run("synth --out " + d1.string() + " --classes 4 --per-class 2 --val-per-class 1 --side 24 --frames 9 --seed 1") == 0);
  REQUIRE(run("synth --out " + d2.string() + " --classes 4 --per-class 2 --val-per-class 1 --side 24 --frames 9 --seed 1") == 0);

  size_t compared = 0;
  for (auto& entry : std::filesystem::recursive_directory_iterator(d1)) {
    if (!entry.is_regular_file()) continue;
    auto rel = std::filesystem::relative(entry.path(), d1);
    CHECK(slurp(entry.path()) == slurp(d2 / rel));
    ++compared;
  }
  CHECK(compared > 8);

  // manifest artifact begins with a config-echo comment header
  const std::string manifest = slurp(d1 / "train.manifest");
  CHECK(manifest.rfind("# tool=vlab", 0) == 0);
  CHECK(manifest.find("seed=1") != std::string::npos);
}

TEST_CASE("audit family exit codes: 0 for mc3, 2 for r3d, 1 for class mismatch") {
  auto dir = work_dir();
  std::string out;
  CHECK(run("audit --family mc3 --out " + (dir / "a_mc3.csv").string() + " --reference " +
            kRefDir.string(), &out) == 0);
  CHECK(out.find("pass") != std::string::npos);

  CHECK(run("audit --family r3d --out " + (dir / "a_r3d.csv").string() + " --reference " +
            kRefDir.string(), &out) == 2);
  CHECK(out.find("documented") != std::string::npos);

  // 400 classes against the 101-class references: forced unexpected diff
  CHECK(run("audit --family mc3 --classes 400 --out " + (dir / "a_400.csv").string() +
            " --reference " + kRefDir.string(), &out) == 1);

  // audit artifact is a valid CSV with the standard table header
  CsvTable t = read_csv(dir / "a_mc3.csv");
  CHECK(t.rows.size() == 11);
  CHECK(t.header[0] == "variant");
  bool has_tool_line = false;
  for (const auto& c : t.comments) has_tool_line = has_tool_line || c.rfind("# tool=vlab", 0) == 0;
  CHECK(has_tool_line);
}

TEST_CASE("train on synthetic data writes checkpoint and schedule-conformant log") {
  auto dir = work_dir();
  auto data = dir / "train_data";
  std::filesystem::remove_all(data);
  REQUIRE(run("synth --out " + data.string() + " --per-class 3 --val-per-class 1 --side 24 --frames 9 --seed 3") == 0);

  auto rundir = dir / "run1";
  std::filesystem::remove_all(rundir);
  std::string out;
  int code = run("train --train-manifest " + (data / "train.manifest").string() +
                     " --val-manifest " + (data / "val.manifest").string() + " --out " +
                     rundir.string() +
                     " --backbone r3d --variant 3-temporal --classes 4 --scale 0.125 --frames 8 --side 24" +
                     " --set train.max_epochs=2 --set train.batch_size=6 --set data.flip_prob=0" +
                     " --set data.min_frames=8 --set data.resize=24 --seed 11",
                 &out);
  REQUIRE_MESSAGE(code == 0, out);
  CHECK(std::filesystem::exists(rundir / "best.ckpt"));

  CsvTable log = read_csv(rundir / "epochs.csv");
  REQUIRE(log.rows.size() == 2);
  CHECK(std::stod(log.rows[0][1]) == doctest::Approx(0.001));  // lr column follows the schedule
  CHECK(std::stod(log.rows[1][1]) == doctest::Approx(0.001));
  bool has_config = false;
  for (const auto& c : log.comments) has_config = has_config || c.find("train.lr0=0.001") != std::string::npos;
  CHECK(has_config);

  // eval the checkpoint and emit a class report, then a comparison table
  auto report_csv = dir / "cr_backbone.csv";
  REQUIRE(run("eval --checkpoint " + (rundir / "best.ckpt").string() + " --manifest " +
              (data / "val.manifest").string() + " --out " + report_csv.string() +
              " --set data.min_frames=8 --set data.clip_len=8 --set data.resize=24 --set data.crop=24 --seed 11",
              &out) == 0);
  CHECK(std::filesystem::exists(report_csv));

  auto table_csv = dir / "table.csv";
  auto chart_svg = dir / "chart.svg";
  REQUIRE(run("report --backbone-run " + report_csv.string() + " --variant-runs " +
              report_csv.string() + " --out " + table_csv.string() + " --chart " + chart_svg.string(),
              &out) == 0);
  CsvTable table = read_csv(table_csv);
  CHECK(table.header == split_csv_line(kTableCsvHeader));
  CHECK(table.rows.size() == 2);
  const std::string svg = slurp(chart_svg);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("tool=vlab") != std::string::npos);
}

TEST_CASE("missing manifest exits 3") {
  auto dir = work_dir();
  std::string out;
  CHECK(run("train --train-manifest " + (dir / "nope.manifest").string() + " --val-manifest " +
            (dir / "nope2.manifest").string(), &out) == 3);
}

TEST_CASE("unknown config keys are rejected") {
  std::string out;
  CHECK(run("audit --family mc3 --set bogus.key=1 --reference " + kRefDir.string(), &out) == 1);
  CHECK(out.find("unknown config key") != std::string::npos);
}

int main(int argc, char** argv) {
  if (argc > 1 && argv[argc - 1][0] != '-') {
    g_cli = argv[argc - 1];
    --argc;
  }
  if (g_cli.empty()) {
    std::fprintf(stderr, "usage: test_cli [doctest args] <path-to-vlab-binary>\n");
    return 1;
  }
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
