// Acceptance suite: runs every committed criterion end to end and prints one
// pass/fail line per criterion. Exit code is the number of failed criteria.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "vlab/config.hpp"
#include "vlab/gradcheck.hpp"
#include "vlab/oracle.hpp"
#include "vlab/report.hpp"

using namespace vlab;

namespace {

const std::filesystem::path kRefDir = std::filesystem::path(VLAB_SOURCE_DIR) / "data" / "reference";

struct CriterionFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define EXPECT(cond, msg)                                                     \
  do {                                                                        \
    if (!(cond)) {                                                            \
      std::ostringstream os_;                                                 \
      os_ << msg;                                                             \
      throw CriterionFailure(os_.str());                                      \
    }                                                                         \
  } while (0)

std::filesystem::path work_dir() {
  auto p = std::filesystem::temp_directory_path() / "vlab_acceptance";
  std::filesystem::create_directories(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)), {});
}

// closed-form attention-block parameter counts, independent of the blocks
int64_t cf_se(int64_t c, int64_t r = 2) { return c * (c / r) + (c / r) + (c / r) * c + c; }
int64_t cf_mha(int64_t c) { return 4 * (c * c + c); }
int64_t cf_cbam(int64_t c, int64_t r = 16) { return 2 * c * (c / r) + 2 * 7 * 7 * 7 + 1; }
int64_t cf_tcn(int64_t c) { return 3 * c * c + c; }

int64_t closed_form_delta(Variant v) {
  switch (v) {
    case Variant::Backbone: return 0;
    case Variant::FCSpatial:
    case Variant::FCTemporal: return cf_mha(512);
    case Variant::ThreeSE: return cf_mha(512) + cf_se(256);
    case Variant::ThreeTemporal: return cf_mha(512) + cf_mha(256);
    case Variant::ThreeBoth: return cf_mha(512) + cf_se(256) + cf_mha(256);
    case Variant::ThreeCBAM: return cf_mha(512) + cf_cbam(256);
    case Variant::ThreeTCN: return cf_mha(512) + cf_tcn(256);
    case Variant::AllSE: return cf_mha(512) + cf_se(64) + cf_se(128) + cf_se(256);
    case Variant::AllTemporal: return cf_mha(512) + cf_mha(64) + cf_mha(128) + cf_mha(256);
    case Variant::AllTogether:
      return cf_mha(512) + cf_se(64) + cf_se(128) + cf_se(256) + cf_mha(64) + cf_mha(128) + cf_mha(256);
  }
  return 0;
}

// scale-1 audit totals, shared between criteria 1, 2 and 7
struct AuditTotals {
  std::map<std::string, std::map<std::string, int64_t>> totals;  // family -> variant -> count
  bool done = false;
};
AuditTotals g_audit;

void run_full_audit() {
  if (g_audit.done) return;
  for (Backbone b : {Backbone::MC3, Backbone::R2Plus1D, Backbone::R3D}) {
    for (Variant v : all_variants()) {
      ModelConfig cfg;
      cfg.backbone = b;
      cfg.variant = v;
      cfg.classes = 101;
      ModelT<float> m = build_model<float>(cfg, 1);
      g_audit.totals[to_string(b)][to_string(v)] = param_audit(m).total;
    }
  }
  g_audit.done = true;
}

void criterion1_parameter_reproduction() {
  const auto start = std::chrono::steady_clock::now();
  run_full_audit();

  struct Row {
    const char* variant;
    double table;
  };
  const std::map<std::string, std::vector<Row>> published = {
      {"mc3",
       {{"backbone", 11.54}, {"fc-spatial", 12.59}, {"fc-temporal", 12.59}, {"3-se", 12.65},
        {"3-temporal", 12.85}, {"3-both", 12.92}, {"3-cbam", 12.60}, {"3-tcn", 12.79},
        {"all-se", 12.68}, {"all-temporal", 12.94}, {"all-together", 13.02}}},
      {"r2plus1d",
       {{"backbone", 31.35}, {"fc-spatial", 32.40}, {"fc-temporal", 32.40}, {"3-se", 32.46},
        {"3-temporal", 32.66}, {"3-both", 32.73}, {"3-cbam", 32.41}, {"3-tcn", 32.60},
        {"all-se", 32.49}, {"all-temporal", 32.75}, {"all-together", 32.83}}},
      {"r3d",
       {{"backbone", 33.21}, {"fc-spatial", 34.26}, {"fc-temporal", 34.53}, {"3-se", 34.33},
        {"3-temporal", 34.53}, {"3-both", 34.59}, {"3-cbam", 34.27}, {"3-tcn", 34.46},
        {"all-se", 34.35}, {"all-temporal", 34.61}, {"all-together", 34.70}}},
  };

  int matches = 0;
  int documented = 0;
  for (const auto& [family, rows] : published) {
    for (const Row& row : rows) {
      const double audited = double(g_audit.totals.at(family).at(row.variant)) / 1e6;
      const double diff = std::abs(audited - row.table);
      const bool is_known_discrepancy = family == "r3d" && std::string(row.variant) == "fc-temporal";
      if (is_known_discrepancy) {
        EXPECT(diff > 0.01, "r3d fc-temporal unexpectedly matches the printed 34.53");
        EXPECT(std::abs(audited - 34.26) <= 0.01 + 1e-9,
               "r3d fc-temporal audited " << audited << " not at the expected 34.26");
        ++documented;
      } else {
        EXPECT(diff <= 0.01 + 1e-9, family << "/" << row.variant << " audited " << audited
                                           << "M vs published " << row.table << "M");
        ++matches;
      }
    }
  }
  EXPECT(matches == 32 && documented == 1, "expected 32 matches plus 1 documented discrepancy");

  // spot anchors
  EXPECT(g_audit.totals["mc3"]["backbone"] == 11542053, "M-MC3 anchor");
  EXPECT(g_audit.totals["r2plus1d"]["backbone"] == 31351938, "M-R(2+1)D anchor");
  EXPECT(g_audit.totals["r3d"]["backbone"] == 33218085, "M-R3D anchor");
  EXPECT(std::abs(double(g_audit.totals["mc3"]["all-together"]) / 1e6 - 13.02) <= 0.01 + 1e-9,
         "MC3 all-together anchor");

  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT(elapsed < 60.0, "audit of 33 architectures took " << elapsed << "s (budget 60s)");
  std::printf("        33 architectures audited in %.1fs\n", elapsed);
}

void criterion2_delta_additivity() {
  run_full_audit();
  EXPECT(cf_mha(512) == 1050624, "closed form for the 512-dim block");
  EXPECT(cf_mha(64) + cf_mha(128) + cf_mha(256) == 345856, "closed form for the all-temporal sum");
  for (const auto& [family, by_variant] : g_audit.totals) {
    const int64_t base = by_variant.at("backbone");
    for (Variant v : all_variants()) {
      const int64_t delta = by_variant.at(to_string(v)) - base;
      EXPECT(delta == closed_form_delta(v),
             family << "/" << to_string(v) << " delta " << delta << " != closed form "
                    << closed_form_delta(v));
    }
  }
}

void criterion3_numerics() {
  // conv3d vs the naive oracle on 50 randomized cases
  Rng root(20240811);
  for (int c = 0; c < 50; ++c) {
    Rng rng = root.split(uint64_t(c));
    const int64_t C = 1 + int64_t(rng.next_below(4));
    const int64_t OC = 1 + int64_t(rng.next_below(5));
    const std::array<int64_t, 3> k{1 + int64_t(rng.next_below(3)), 1 + int64_t(rng.next_below(3)),
                                   1 + int64_t(rng.next_below(3))};
    const std::array<int64_t, 3> stride{1 + int64_t(rng.next_below(2)), 1 + int64_t(rng.next_below(2)),
                                        1 + int64_t(rng.next_below(2))};
    const std::array<int64_t, 3> pad{int64_t(rng.next_below(2)), int64_t(rng.next_below(2)),
                                     int64_t(rng.next_below(2))};
    auto layer = Conv3dT<float>::make(C, OC, k, stride, pad, rng.next_below(2) == 0, rng.split(1));
    Tensor x = uniform<float>({1 + int64_t(rng.next_below(2)), C, k[0] + int64_t(rng.next_below(4)),
                               k[1] + int64_t(rng.next_below(7)), k[2] + int64_t(rng.next_below(7))},
                              rng.split(2), -1.0f, 1.0f);
    Tensor fast = conv3d_forward(x, layer);
    Tensor ref = conv3d_naive_oracle(x, layer);
    for (int64_t i = 0; i < fast.numel(); ++i)
      EXPECT(std::abs(fast.data()[i] - ref.data()[i]) < 1e-5f,
             "conv3d/oracle divergence in case " << c);
  }

  // gradient checks through every attention block, 32- and 64-bit. The loss
  // is a fixed random-sign linear probe of the output (a vector-Jacobian
  // check): it keeps the loss O(1) so the 32-bit finite differences are not
  // swamped by forward-pass roundoff, and it adds no curvature of its own.
  auto block_checks = [&](auto tag) {
    using T = decltype(tag);
    const T tol = sizeof(T) == 4 ? T(1e-3) : T(1e-4);
    const T eps = sizeof(T) == 4 ? T(1e-2) : T(1e-5);
    Rng rng(77);
    TensorT<T> x = uniform<T>({1, 8, 3, 4, 4}, rng.split(9), T(-1), T(1));
    TensorT<T> probe(x.shape());
    {
      Rng prng = rng.split(8);
      const T unit = T(1) / std::sqrt(T(x.numel()));
      for (int64_t i = 0; i < probe.numel(); ++i)
        probe.data()[i] = prng.u32_at(uint64_t(i)) & 1u ? unit : -unit;
    }
    auto check = [&](const char* name, auto&& fwd) {
      // at 32-bit, coordinates whose probe interval straddles a relu/max kink
      // are excluded: the central difference is not a derivative there
      const bool skip_kinks = sizeof(T) == 4;
      auto res = grad_check<T>(
          [&](const TensorT<T>& t) {
            return reduce_sum(mul(fwd(t), probe), {0, 1, 2, 3, 4});
          },
          x, eps, 32, skip_kinks);
      EXPECT(res.max_rel_err < tol, name << " gradcheck err " << res.max_rel_err << " at "
                                         << (sizeof(T) == 4 ? "32" : "64") << "-bit");
      EXPECT(res.coords_skipped * 4 <= res.coords_checked,
             name << " kink guard skipped too many coordinates: " << res.coords_skipped);
      if (sizeof(T) == 8)
        EXPECT(res.coords_skipped == 0, name << " 64-bit check must not skip coordinates");
    };
    auto se = SEBlockT<T>::make(8, 2, rng.split(0));
    check("se", [&](const TensorT<T>& t) { return se_forward(t, se); });
    auto cbam = CBAMBlockT<T>::make(8, 4, rng.split(1));
    check("cbam", [&](const TensorT<T>& t) { return cbam_forward(t, cbam); });
    auto mha = MultiHeadAttnT<T>::make(8, 4, AttnAxis::Temporal, rng.split(2));
    check("mha", [&](const TensorT<T>& t) { return mha_forward(t, mha); });
    auto tcn = TCNBlockT<T>::make(8, rng.split(3));
    check("tcn", [&](const TensorT<T>& t) { return tcn_forward(t, tcn); });
  };
  block_checks(float{});
  block_checks(double{});

  // Full tiny model gradient check. The 64-bit pass compares autodiff
  // against central differences on the train-mode graph at a step where the
  // oracle is valid through the batch-normalization chain. The 32-bit pass
  // compares the float implementation's gradients against the same
  // double-precision finite-difference oracle: a pure-float oracle has no
  // valid step size for a ten-layer network (roundoff floor meets curvature
  // ceiling), so the accurate oracle is the honest referee for the float
  // path's 1e-3 budget.
  {
    ModelConfig cfg;
    cfg.backbone = Backbone::MC3;  // keeps several temporal tokens at the final block
    cfg.variant = Variant::ThreeSE;
    cfg.classes = 4;
    cfg.width_scale = 0.125;
    cfg.frames = 8;
    cfg.side = 16;
    ModelT<double> md = build_model<double>(cfg, 5);
    ModelT<float> mf = build_model<float>(cfg, 5);  // identical values by construction
    Rng rng(31);
    TensorT<double> xd = uniform<double>({2, 3, 8, 16, 16}, rng.split(0), -1.0, 1.0);
    TensorT<float> xf(xd.shape());
    for (int64_t i = 0; i < xd.numel(); ++i) xf.data()[i] = float(xd.data()[i]);
    std::vector<int64_t> labels{1, 3};
    const Rng dropout_rng = rng.split(1);
    auto loss_d = [&] {
      TensorT<double> logits = forward(md, xd, Mode::Train, dropout_rng);
      return cross_entropy(logits, std::span<const int64_t>(labels));
    };

    const std::vector<std::string> targets{"stem.conv.weight",  "layer3.1.conv2.conv.weight",
                                           "attn3.0.se.fc1.weight", "final.mha.q.weight",
                                           "fc.weight",         "layer1.0.bn1.scale"};
    auto find_param = [](auto& model, const std::string& name) {
      for (auto& p : model.registry)
        if (p.name == name) return p.tensor;
      throw CriterionFailure("missing parameter " + name);
    };

    // float gradients from one train-mode backward
    {
      TapeT<float> tape;
      TapeT<float>::Scope scope(tape);
      zero_gradients(mf.registry);
      xf.set_requires_grad(true);
      xf.zero_grad();
      TensorT<float> logits = forward(mf, xf, Mode::Train, dropout_rng);
      TensorT<float> loss = cross_entropy(logits, std::span<const int64_t>(labels));
      backward(loss);
    }

    auto check_pair = [&](const std::string& name, TensorT<double> target_d,
                          const std::vector<float>& float_grad) {
      // 64-bit: autodiff vs finite differences on the same tensor
      auto res64 = grad_check_at<double>(loss_d, target_d, 1e-6, 24);
      EXPECT(res64.max_rel_err < 1e-4, "tiny model " << name << " 64-bit gradcheck err "
                                                     << res64.max_rel_err);
      // 32-bit: per-coordinate float gradient vs the double FD oracle
      const int64_t n = target_d.numel();
      const int64_t probes = std::min<int64_t>(24, n);
      double* d = target_d.data();
      double worst = 0;
      for (int64_t k = 0; k < probes; ++k) {
        const int64_t i = (probes == n) ? k : (k * n) / probes;
        const double saved = d[i];
        d[i] = saved + 1e-6;
        const double fp = loss_d().item();
        d[i] = saved - 1e-6;
        const double fm = loss_d().item();
        d[i] = saved;
        const double fd = (fp - fm) / 2e-6;
        const double fg = double(float_grad[size_t(i)]);
        worst = std::max(worst, std::abs(fg - fd) / std::max({std::abs(fg), std::abs(fd), 1.0}));
      }
      EXPECT(worst < 1e-3, "tiny model " << name << " 32-bit gradients off by " << worst
                                         << " against the 64-bit oracle");
    };

    xf.ensure_grad();
    check_pair("input", xd, xf.grad());
    for (const auto& name : targets) {
      TensorT<float> pf = find_param(mf, name);
      pf.ensure_grad();
      check_pair(name, find_param(md, name), pf.grad());
    }
  }

  // softmax normalization
  Rng rng(99);
  Tensor sm = softmax(uniform<float>({8, 11}, rng, -4.0f, 4.0f), 1);
  for (int64_t r = 0; r < 8; ++r) {
    double sum = 0;
    for (int64_t c = 0; c < 11; ++c) sum += sm.at({r, c});
    EXPECT(std::abs(sum - 1.0) <= 1e-6, "softmax row sum " << sum);
  }

  // uniform 101-class cross entropy
  Tensor logits = zeros<float>({3, 101});
  std::vector<int64_t> labels{0, 50, 100};
  const double ce = double(cross_entropy(logits, std::span<const int64_t>(labels)).item());
  EXPECT(std::abs(ce - std::log(101.0)) <= 1e-6, "uniform cross entropy " << ce);
}

void criterion4_pipeline_conformance() {
  // frame cap: n=95 subsamples at stride 2
  auto idx = cap_frame_indices(95, 48);
  EXPECT(idx.size() == 48, "cap size");
  for (int64_t i = 0; i < 48; ++i) EXPECT(idx[size_t(i)] == 2 * i, "cap index " << i);
  for (size_t i = 1; i < idx.size(); ++i) EXPECT(idx[i] > idx[i - 1], "cap ordering");

  // padding: n=5 reaches 32 with a repeated tail
  RawVideo five;
  five.id = "five";
  for (int t = 0; t < 5; ++t) {
    Image8 f;
    f.width = 8;
    f.height = 8;
    f.rgb.assign(8 * 8 * 3, uint8_t(t));
    five.frames.push_back(f);
  }
  auto padded = pad_min(five.frames, 32);
  EXPECT(padded.size() == 32, "pad length");
  for (size_t i = 5; i < 32; ++i) EXPECT(padded[i].rgb == five.frames[4].rgb, "pad tail at " << i);

  // start uniformity over the 17 possible positions of a 32-frame sequence
  Rng rng(7);
  std::vector<int64_t> counts(17, 0);
  for (int64_t i = 0; i < 10000; ++i) counts[size_t(sample_clip_start(32, 16, rng))]++;
  const double expect = 10000.0 / 17.0;
  const double sigma = std::sqrt(expect * (1.0 - 1.0 / 17.0));
  for (size_t s = 0; s < 17; ++s)
    EXPECT(std::abs(double(counts[s]) - expect) < 3.0 * sigma + 1.0,
           "start " << s << " count " << counts[s]);

  // paper-scale output shape and the three-clip protocol
  PipelineConfig pcfg;
  RawVideo video;
  video.id = "v";
  Rng frng(3);
  for (int t = 0; t < 40; ++t) {
    Image8 f;
    f.width = 320;
    f.height = 240;
    f.rgb.resize(320 * 240 * 3);
    for (auto& b : f.rgb) b = uint8_t(frng.next_below(256));
    video.frames.push_back(std::move(f));
  }
  ClipTensor train1 = train_clip(video, pcfg, Rng(5).split(1), Rng(5).split(2));
  EXPECT((train1.data.shape() == Shape{3, 16, 224, 224}), "train clip shape");
  ClipTensor train2 = train_clip(video, pcfg, Rng(5).split(1), Rng(5).split(2));
  EXPECT(train1.data.vec() == train2.data.vec(), "train path determinism");

  auto clips_a = eval_clips(video, pcfg, Rng(9).split(0));
  auto clips_b = eval_clips(video, pcfg, Rng(9).split(0));
  EXPECT(clips_a.size() == 3, "three clips");
  for (size_t i = 0; i < 3; ++i) {
    EXPECT((clips_a[i].data.shape() == Shape{3, 16, 224, 224}), "eval clip shape");
    EXPECT(clips_a[i].start_index == clips_b[i].start_index, "eval start determinism");
    EXPECT(clips_a[i].data.vec() == clips_b[i].data.vec(), "eval path bit determinism");
  }
}

void criterion5_schedule_conformance() {
  TrainConfig cfg;
  EXPECT(lr_at(1, cfg) == 0.001, "lr at epoch 1");
  EXPECT(std::abs(lr_at(16, cfg) - 0.0001) < 1e-15, "lr at epoch 16");
  EXPECT(std::abs(lr_at(31, cfg) - 0.00001) < 1e-16, "lr at epoch 31");

  // five momentum-SGD steps against an independent scalar iteration
  double w = 1.0, v = 0.0, w_ref = 1.0, v_ref = 0.0;
  for (int step = 0; step < 5; ++step) {
    const double g_ref = 2.0 * w_ref;
    v_ref = 0.9 * v_ref + g_ref;
    w_ref -= 0.1 * v_ref;
    const double g = 2.0 * w;
    sgd_update<double>(&w, &g, &v, 1, 0.1, 0.9, 0.0);
    EXPECT(std::abs(w - w_ref) < 1e-12, "sgd step " << step << ": " << w << " vs " << w_ref);
  }

  // scripted early-stopping sequences through the production stopper
  {
    EarlyStopper s{5, 0.0};
    const double seq[] = {10, 11, 11, 11, 11, 11, 11};
    int64_t stopped_at = 0;
    for (int64_t e = 1; e <= 7; ++e)
      if (s.observe(e, seq[e - 1])) {
        stopped_at = e;
        break;
      }
    EXPECT(stopped_at == 7, "patience-5 plateau stops after epoch 7, got " << stopped_at);
    EXPECT(s.best_epoch == 2, "best epoch 2, got " << s.best_epoch);
  }
  {
    EarlyStopper s{5, 0.0};
    bool stopped = false;
    for (int64_t e = 1; e <= 50; ++e) stopped = stopped || s.observe(e, double(e));
    EXPECT(!stopped, "strictly improving sequence must never stop");
    EXPECT(s.best_epoch == 50, "best tracks the last improvement");
  }
  {
    EarlyStopper s{3, 0.5};
    // improvements below min_delta do not reset patience
    EXPECT((!s.observe(1, 10.0)), "first epoch");
    EXPECT((!s.observe(2, 10.4)), "sub-threshold improvement 1");
    EXPECT((!s.observe(3, 10.4)), "sub-threshold improvement 2");
    EXPECT((s.observe(4, 10.4)), "stops at patience 3");
    EXPECT(s.best_epoch == 1, "best epoch unchanged by sub-threshold improvements");
  }
}

void criterion6_temporal_signal() {
  // 200 train / 80 val synthetic motion videos; tiny backbone, paper recipe.
  SynthConfig sc;
  sc.per_class = 50;
  sc.side = 32;
  sc.frames = 12;
  sc.seed = 1;
  sc.split_name = "train";
  auto train_data = synth_motion_videos(sc);
  sc.split_name = "val";
  sc.per_class = 20;
  auto val_data = synth_motion_videos(sc);
  EXPECT(train_data.size() == 200 && val_data.size() == 80, "dataset sizes");

  ModelConfig mc;
  mc.backbone = Backbone::R3D;
  mc.variant = Variant::Backbone;
  mc.classes = 4;
  mc.width_scale = 0.125;
  mc.frames = 8;
  mc.side = 32;

  PipelineConfig pcfg;
  pcfg.min_frames = 8;
  pcfg.clip_len = 8;
  pcfg.resize = 32;
  pcfg.crop = 32;
  pcfg.flip_prob = 0.0;  // horizontal flips would relabel left/right drift

  TrainConfig tc;  // the full-scale recipe: lr 0.001, momentum 0.9, wd 5e-4
  tc.max_epochs = 30;
  tc.patience = 30;  // fixed budget: the assertion is about epoch 30, not the stop rule

  auto run_arm = [&](bool shuffled) {
    PipelineConfig arm = pcfg;
    arm.shuffle_frames = shuffled;
    ModelT<float> model = build_model<float>(mc, 7);
    TrainResult r = train_loop(model, train_data, val_data, tc, arm, 7);
    std::printf("        %s arm: best val top-1 %.2f%% at epoch %lld\n",
                shuffled ? "shuffled" : "normal  ", r.best_val_top1, (long long)r.best_epoch);
    std::fflush(stdout);
    return r;
  };

  TrainResult normal = run_arm(false);
  EXPECT(normal.best_val_top1 >= 90.0,
         "normal training reached only " << normal.best_val_top1 << "% within 30 epochs");

  TrainResult shuffled = run_arm(true);
  EXPECT(shuffled.best_val_top1 <= 60.0,
         "temporally shuffled training reached " << shuffled.best_val_top1
                                                 << "%, above the 60% ceiling");
  EXPECT(normal.best_val_top1 > shuffled.best_val_top1 + 25.0,
         "ordering margin: normal " << normal.best_val_top1 << " vs shuffled "
                                    << shuffled.best_val_top1);
}

void criterion7_nonreproducible_reference_only() {
  run_full_audit();
  auto dir = work_dir();

  // published full-scale accuracies ship as audit-only references
  struct Anchor {
    const char* family;
    const char* variant;
    const char* column;
    double value;
  };
  for (const Anchor& a : std::initializer_list<Anchor>{{"mc3", "backbone", "top1", 81.21},
                                                       {"r2plus1d", "backbone", "top1", 85.14},
                                                       {"r3d", "backbone", "top1", 79.99},
                                                       {"r2plus1d", "3-temporal", "top1", 88.98}}) {
    CsvTable t = read_csv(kRefDir / (std::string(a.family) + "_family.csv"));
    const int64_t kc = t.require_col("variant");
    const int64_t vc = t.require_col(a.column);
    const int64_t ao = t.require_col("audit_only");
    bool found = false;
    for (const auto& row : t.rows) {
      if (row[size_t(kc)] != a.variant) continue;
      found = true;
      EXPECT(std::abs(std::stod(row[size_t(vc)]) - a.value) < 1e-9,
             a.family << "/" << a.variant << " " << a.column << " transcription");
      EXPECT(row[size_t(ao)] == "1", "row must be flagged audit_only");
    }
    EXPECT(found, "missing reference row " << a.family << "/" << a.variant);
  }

  // verification consumes them params-only: an audit CSV with zeroed accuracy
  // columns passes every family (documented diff allowed on r3d)
  for (const char* family : {"mc3", "r2plus1d", "r3d"}) {
    const auto csv = dir / (std::string("audit_") + family + ".csv");
    std::vector<TableRow> rows;
    for (Variant v : all_variants()) {
      TableRow row;
      row.report.model_name = to_string(v);
      row.report.params_millions = round_millions_2dp(g_audit.totals[family][to_string(v)]);
      rows.push_back(row);
    }
    emit_table_csv(csv, rows, {"acceptance audit"});
    VerifyResult vr = verify_against_reference(csv, kRefDir / (std::string(family) + "_family.csv"));
    if (std::string(family) == "r3d") {
      EXPECT(!vr.pass && vr.documented_only && vr.diffs.size() == 1 &&
                 vr.diffs[0].row_key == "fc-temporal",
             "r3d verification must flag exactly the documented fc-temporal row");
    } else {
      EXPECT(vr.pass, family << " verification failed with " << vr.diffs.size() << " diffs");
    }
  }
}

void criterion8_report_semantics() {
  auto dir = work_dir();

  auto report_from = [&](const CsvTable& t, const std::string& column) {
    ClassReport r;
    r.model_name = column;
    const int64_t cc = t.require_col("class");
    const int64_t vc = t.require_col(column);
    for (const auto& row : t.rows) {
      r.class_names.push_back(row[size_t(cc)]);
      r.accuracy.push_back(std::stod(row[size_t(vc)]));
    }
    return r;
  };

  // M-R3D's worst class from the transcribed per-class columns
  CsvTable r3d = read_csv(kRefDir / "r3d_worst5.csv");
  auto w = worst_k(report_from(r3d, "backbone"), 1);
  EXPECT(w[0].first == "PizzaTossing" && std::abs(w[0].second - 9.09) < 1e-9,
         "M-R3D worst class: got " << w[0].first << " " << w[0].second);

  // the M-MC3 five-worst set
  CsvTable mc3 = read_csv(kRefDir / "mc3_worst5.csv");
  auto mc3_worst = worst_k(report_from(mc3, "backbone"), 5);
  std::set<std::string> got;
  for (auto& [n, _] : mc3_worst) got.insert(n);
  const std::set<std::string> want{"BrushingTeeth", "WalkingWithDog", "HandstandWalking",
                                   "PizzaTossing", "HighJump"};
  EXPECT(got == want, "M-MC3 five-worst set mismatch");

  // the published derived fact: 3-CBAM's best improvement among them is
  // HighJump +26.03 over the backbone column
  auto cmp = compare(report_from(mc3, "backbone"), report_from(mc3, "3-cbam"));
  EXPECT(cmp.highest_increase_class == "HighJump" &&
             std::abs(cmp.highest_increase_delta - 26.03) < 1e-9,
         "3-CBAM highest increase");

  // byte-deterministic emission
  std::vector<std::string> classes, series{"backbone", "3-cbam"};
  std::vector<std::vector<double>> acc(2);
  for (const auto& row : mc3.rows) {
    classes.push_back(row[0]);
    acc[0].push_back(std::stod(row[size_t(mc3.require_col("backbone"))]));
    acc[1].push_back(std::stod(row[size_t(mc3.require_col("3-cbam"))]));
  }
  emit_chart_svg(dir / "c8a.svg", classes, series, acc, "worst classes", {"run=a"});
  emit_chart_svg(dir / "c8b.svg", classes, series, acc, "worst classes", {"run=a"});
  EXPECT(slurp(dir / "c8a.svg") == slurp(dir / "c8b.svg"), "SVG emission not byte-deterministic");
  EXPECT(!slurp(dir / "c8a.svg").empty(), "empty SVG");

  ClassReport base = report_from(mc3, "backbone");
  std::vector<TableRow> rows{{base, std::nullopt}, {report_from(mc3, "3-cbam"), cmp}};
  emit_table_csv(dir / "c8a.csv", rows, {"run=a"});
  emit_table_csv(dir / "c8b.csv", rows, {"run=a"});
  EXPECT(slurp(dir / "c8a.csv") == slurp(dir / "c8b.csv"), "CSV emission not byte-deterministic");
  CsvTable back = read_csv(dir / "c8a.csv");
  EXPECT(back.header == split_csv_line(kTableCsvHeader), "emitted CSV header");
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<void()> body;
  };
  const std::vector<Criterion> criteria{
      {1, "parameter-count reproduction (33 architectures, +-0.01M)", criterion1_parameter_reproduction},
      {2, "delta additivity (integer equality with closed forms)", criterion2_delta_additivity},
      {3, "numerics (conv oracle, gradient checks, softmax, cross entropy)", criterion3_numerics},
      {4, "pipeline conformance (cap, pad, sampling, shapes, determinism)", criterion4_pipeline_conformance},
      {5, "schedule conformance (lr table, momentum SGD oracle, early stopping)", criterion5_schedule_conformance},
      {6, "temporal-signal property (synthetic motion, normal vs shuffled)", criterion6_temporal_signal},
      {7, "published accuracies ship as audit-only references", criterion7_nonreproducible_reference_only},
      {8, "report semantics (worst-k, comparisons, deterministic emission)", criterion8_report_semantics},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    try {
      c.body();
      std::printf("[PASS] criterion %d: %s\n", c.id, c.name);
    } catch (const std::exception& e) {
      std::printf("[FAIL] criterion %d: %s\n       %s\n", c.id, c.name, e.what());
      ++failures;
    }
    std::fflush(stdout);
  }
  if (failures == 0) std::printf("all %zu acceptance criteria passed\n", criteria.size());
  return failures;
}
