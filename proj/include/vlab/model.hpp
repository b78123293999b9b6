#pragma once

#include <map>
#include <sstream>

#include "vlab/attention.hpp"
#include "vlab/serialize.hpp"

namespace vlab {

enum class Backbone { R3D, MC3, R2Plus1D };
enum class Variant {
  Backbone,
  FCSpatial,
  FCTemporal,
  ThreeSE,
  ThreeTemporal,
  ThreeBoth,
  ThreeCBAM,
  ThreeTCN,
  AllSE,
  AllTemporal,
  AllTogether,
};

inline const char* to_string(Backbone b) {
  switch (b) {
    case Backbone::R3D: return "r3d";
    case Backbone::MC3: return "mc3";
    case Backbone::R2Plus1D: return "r2plus1d";
  }
  return "?";
}

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::Backbone: return "backbone";
    case Variant::FCSpatial: return "fc-spatial";
    case Variant::FCTemporal: return "fc-temporal";
    case Variant::ThreeSE: return "3-se";
    case Variant::ThreeTemporal: return "3-temporal";
    case Variant::ThreeBoth: return "3-both";
    case Variant::ThreeCBAM: return "3-cbam";
    case Variant::ThreeTCN: return "3-tcn";
    case Variant::AllSE: return "all-se";
    case Variant::AllTemporal: return "all-temporal";
    case Variant::AllTogether: return "all-together";
  }
  return "?";
}

inline Backbone parse_backbone(const std::string& s) {
  if (s == "r3d") return Backbone::R3D;
  if (s == "mc3") return Backbone::MC3;
  if (s == "r2plus1d") return Backbone::R2Plus1D;
  fail(ErrorKind::Config, "unknown backbone '" + s + "'");
}

inline Variant parse_variant(const std::string& s) {
  for (int i = 0; i <= int(Variant::AllTogether); ++i)
    if (s == to_string(Variant(i))) return Variant(i);
  fail(ErrorKind::Config, "unknown variant '" + s + "'");
}

inline const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v{
      Variant::Backbone,  Variant::FCSpatial,   Variant::FCTemporal, Variant::ThreeSE,
      Variant::ThreeTemporal, Variant::ThreeBoth, Variant::ThreeCBAM,  Variant::ThreeTCN,
      Variant::AllSE,     Variant::AllTemporal, Variant::AllTogether};
  return v;
}

struct ModelConfig {
  Backbone backbone = Backbone::R3D;
  Variant variant = Variant::Backbone;
  int64_t classes = 101;
  double width_scale = 1.0;
  int64_t frames = 16;
  int64_t side = 224;
  int64_t heads = 4;
  int64_t se_reduction = 2;
  int64_t cbam_reduction = 16;
  int64_t cbam_time_kernel = 7;
  bool mha_layernorm = false;
  bool mha_posenc = false;
  double dropout_p = 0.4;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;

  std::vector<int64_t> stage_widths() const {
    std::vector<int64_t> w;
    for (int64_t base : {64, 128, 256, 512}) {
      int64_t s = int64_t(std::llround(width_scale * double(base)));
      if (s < 8) fail(ErrorKind::Config, "scaled stage width " + std::to_string(s) + " below 8");
      if (s % heads != 0)
        fail(ErrorKind::Config, "scaled stage width " + std::to_string(s) + " not divisible by heads");
      w.push_back(s);
    }
    return w;
  }

  int64_t stem_midplanes() const {
    // parameter-matched value for the full-width stem; scaled for desk runs
    return std::max<int64_t>(1, int64_t(std::llround(45.0 * width_scale)));
  }

  std::string to_kv() const {
    std::ostringstream os;
    os << "backbone=" << to_string(backbone) << "\n";
    os << "variant=" << to_string(variant) << "\n";
    os << "classes=" << classes << "\n";
    os << "width_scale=" << width_scale << "\n";
    os << "frames=" << frames << "\n";
    os << "side=" << side << "\n";
    os << "heads=" << heads << "\n";
    os << "se_reduction=" << se_reduction << "\n";
    os << "cbam_reduction=" << cbam_reduction << "\n";
    os << "cbam_time_kernel=" << cbam_time_kernel << "\n";
    os << "mha_layernorm=" << (mha_layernorm ? 1 : 0) << "\n";
    os << "mha_posenc=" << (mha_posenc ? 1 : 0) << "\n";
    os << "dropout_p=" << dropout_p << "\n";
    os << "bn_eps=" << bn_eps << "\n";
    os << "bn_momentum=" << bn_momentum << "\n";
    return os.str();
  }
};

template <typename T>
struct ConvUnitT {
  Conv3dT<T> conv;
  std::optional<BatchNorm3dT<T>> mid_bn;
  std::optional<Conv3dT<T>> temporal;

  TensorT<T> forward(const TensorT<T>& x, Mode mode) {
    TensorT<T> y = conv3d_forward(x, conv);
    if (temporal) {
      y = batchnorm3d_forward(y, *mid_bn, mode);
      y = relu(y);
      y = conv3d_forward(y, *temporal);
    }
    return y;
  }
};

template <typename T>
struct ResBlockT {
  ConvUnitT<T> conv1;
  BatchNorm3dT<T> bn1;
  ConvUnitT<T> conv2;
  BatchNorm3dT<T> bn2;
  std::optional<Conv3dT<T>> down;
  std::optional<BatchNorm3dT<T>> down_bn;

  TensorT<T> forward(const TensorT<T>& x, Mode mode) {
    TensorT<T> y = relu(batchnorm3d_forward(conv1.forward(x, mode), bn1, mode));
    y = batchnorm3d_forward(conv2.forward(y, mode), bn2, mode);
    TensorT<T> shortcut = x;
    if (down) shortcut = batchnorm3d_forward(conv3d_forward(x, *down), *down_bn, mode);
    return relu(add(y, shortcut));
  }
};

template <typename T>
struct NamedTensor {
  std::string name;
  TensorT<T> tensor;
  std::string stage;
  bool learnable = true;
};

template <typename T>
struct ModelT {
  ModelConfig cfg;
  ConvUnitT<T> stem;
  BatchNorm3dT<T> stem_bn;
  std::array<std::vector<ResBlockT<T>>, 4> stages;
  std::array<std::vector<AttnBlockT<T>>, 4> stage_attn;  // applied after each stage
  std::optional<MultiHeadAttnT<T>> final_attn;
  LinearT<T> fc;
  std::vector<NamedTensor<T>> registry;
};

namespace detail {

template <typename T>
void reg(ModelT<T>& m, const std::string& stage, const std::string& name, const TensorT<T>& t,
         bool learnable = true) {
  m.registry.push_back({name, t, stage, learnable});
}

template <typename T>
void reg_conv(ModelT<T>& m, const std::string& stage, const std::string& prefix, const Conv3dT<T>& c) {
  reg(m, stage, prefix + ".weight", c.weight);
  if (c.bias.defined()) reg(m, stage, prefix + ".bias", c.bias);
}

template <typename T>
void reg_bn(ModelT<T>& m, const std::string& stage, const std::string& prefix, const BatchNorm3dT<T>& bn) {
  reg(m, stage, prefix + ".scale", bn.scale);
  reg(m, stage, prefix + ".shift", bn.shift);
  reg(m, stage, prefix + ".running_mean", bn.running_mean, false);
  reg(m, stage, prefix + ".running_var", bn.running_var, false);
}

template <typename T>
void reg_unit(ModelT<T>& m, const std::string& stage, const std::string& prefix, const ConvUnitT<T>& u) {
  reg_conv(m, stage, prefix + ".conv", u.conv);
  if (u.temporal) {
    reg_bn(m, stage, prefix + ".bn_mid", *u.mid_bn);
    reg_conv(m, stage, prefix + ".temporal", *u.temporal);
  }
}

template <typename T>
void reg_linear(ModelT<T>& m, const std::string& stage, const std::string& prefix, const LinearT<T>& l) {
  reg(m, stage, prefix + ".weight", l.weight);
  reg(m, stage, prefix + ".bias", l.bias);
}

template <typename T>
void reg_mha(ModelT<T>& m, const std::string& stage, const std::string& prefix,
             const MultiHeadAttnT<T>& a) {
  reg_linear(m, stage, prefix + ".q", a.q);
  reg_linear(m, stage, prefix + ".k", a.k);
  reg_linear(m, stage, prefix + ".v", a.v);
  reg_linear(m, stage, prefix + ".o", a.o);
  if (a.pre_norm) {
    reg(m, stage, prefix + ".ln.scale", a.pre_norm->scale);
    reg(m, stage, prefix + ".ln.shift", a.pre_norm->shift);
  }
}

template <typename T>
void reg_attn(ModelT<T>& m, const std::string& stage, const std::string& prefix, const AttnBlockT<T>& b) {
  std::visit(
      [&](const auto& blk) {
        using B = std::decay_t<decltype(blk)>;
        if constexpr (std::is_same_v<B, SEBlockT<T>>) {
          reg_linear(m, stage, prefix + ".se.fc1", blk.fc1);
          reg_linear(m, stage, prefix + ".se.fc2", blk.fc2);
        } else if constexpr (std::is_same_v<B, MultiHeadAttnT<T>>) {
          reg_mha(m, stage, prefix + ".mha", blk);
        } else if constexpr (std::is_same_v<B, CBAMBlockT<T>>) {
          reg(m, stage, prefix + ".cbam.mlp1", blk.mlp1);
          reg(m, stage, prefix + ".cbam.mlp2", blk.mlp2);
          reg_conv(m, stage, prefix + ".cbam.spatial", blk.spatial);
        } else {
          reg(m, stage, prefix + ".tcn.conv.weight", blk.conv.weight);
          reg(m, stage, prefix + ".tcn.conv.bias", blk.conv.bias);
        }
      },
      b);
}

enum class ConvKind { Full3d, SpatialOnly, Factorized };

template <typename T>
ConvUnitT<T> make_unit(ConvKind kind, int64_t in_ch, int64_t out_ch, int64_t mid,
                       std::array<int64_t, 3> stride, const ModelConfig& cfg, const Rng& rng) {
  ConvUnitT<T> u;
  switch (kind) {
    case ConvKind::Full3d:
      u.conv = Conv3dT<T>::make(in_ch, out_ch, {3, 3, 3}, stride, {1, 1, 1}, false, rng.split(0));
      break;
    case ConvKind::SpatialOnly:
      u.conv = Conv3dT<T>::make(in_ch, out_ch, {1, 3, 3}, {1, stride[1], stride[2]}, {0, 1, 1}, false,
                                rng.split(0));
      break;
    case ConvKind::Factorized:
      u.conv = Conv3dT<T>::make(in_ch, mid, {1, 3, 3}, {1, stride[1], stride[2]}, {0, 1, 1}, false,
                                rng.split(0));
      u.mid_bn = BatchNorm3dT<T>::make(mid, T(cfg.bn_eps), T(cfg.bn_momentum));
      u.temporal = Conv3dT<T>::make(mid, out_ch, {3, 1, 1}, {stride[0], 1, 1}, {1, 0, 0}, false,
                                    rng.split(1));
      break;
  }
  return u;
}

template <typename T>
AttnBlockT<T> make_attn_block(char kind, int64_t width, AttnAxis axis, const ModelConfig& cfg,
                              const Rng& rng) {
  switch (kind) {
    case 's': return SEBlockT<T>::make(width, cfg.se_reduction, rng);
    case 'm':
      return MultiHeadAttnT<T>::make(width, cfg.heads, axis, rng, cfg.mha_layernorm, cfg.mha_posenc);
    case 'c': return CBAMBlockT<T>::make(width, cfg.cbam_reduction, rng, cfg.cbam_time_kernel);
    case 't': return TCNBlockT<T>::make(width, rng);
  }
  fail(ErrorKind::Config, "bad attention kind");
}

}  // namespace detail

/// Shape walk through a backbone's declared stride tables; fails when any
/// extent drops below 1. Returns per-stage (T,H,W) after each of stem and the
/// four stages.
inline std::vector<std::array<int64_t, 3>> backbone_geometry(Backbone b, int64_t frames, int64_t side) {
  auto conv_out = [](std::array<int64_t, 3> in, std::array<int64_t, 3> k, std::array<int64_t, 3> s,
                     std::array<int64_t, 3> p) {
    std::array<int64_t, 3> o;
    for (int i = 0; i < 3; ++i) {
      o[size_t(i)] = (in[size_t(i)] + 2 * p[size_t(i)] - k[size_t(i)]) / s[size_t(i)] + 1;
      if (o[size_t(i)] < 1) fail(ErrorKind::Geometry, "feature extent < 1; input too small for topology");
    }
    return o;
  };
  std::vector<std::array<int64_t, 3>> out;
  std::array<int64_t, 3> cur{frames, side, side};
  if (b == Backbone::R2Plus1D) {
    cur = conv_out(cur, {1, 7, 7}, {1, 2, 2}, {0, 3, 3});
    cur = conv_out(cur, {3, 1, 1}, {1, 1, 1}, {1, 0, 0});
  } else {
    cur = conv_out(cur, {3, 7, 7}, {1, 2, 2}, {1, 3, 3});
  }
  out.push_back(cur);
  for (int stage = 0; stage < 4; ++stage) {
    std::array<int64_t, 3> stride{1, 1, 1};
    if (stage > 0) stride = b == Backbone::MC3 ? std::array<int64_t, 3>{1, 2, 2} : std::array<int64_t, 3>{2, 2, 2};
    std::array<int64_t, 3> k = b == Backbone::MC3 && stage > 0 ? std::array<int64_t, 3>{1, 3, 3}
                                                               : std::array<int64_t, 3>{3, 3, 3};
    std::array<int64_t, 3> p = b == Backbone::MC3 && stage > 0 ? std::array<int64_t, 3>{0, 1, 1}
                                                               : std::array<int64_t, 3>{1, 1, 1};
    // the (2+1)D pair preserves the same composite geometry as the full kernel
    cur = conv_out(cur, k, stride, p);         // first block, strided
    cur = conv_out(cur, k, {1, 1, 1}, p);      // remaining convs keep extents
    out.push_back(cur);
  }
  return out;
}

template <typename T>
ModelT<T> build_model(const ModelConfig& cfg, uint64_t seed) {
  if (cfg.classes < 1) fail(ErrorKind::Config, "classes must be >= 1");
  if (cfg.frames < 1) fail(ErrorKind::Config, "frames must be >= 1");
  const auto widths = cfg.stage_widths();
  backbone_geometry(cfg.backbone, cfg.frames, cfg.side);  // asserted at build time

  ModelT<T> m;
  m.cfg = cfg;
  Rng root(seed);
  uint64_t next_stream = 0;
  auto rng = [&]() { return root.split(next_stream++); };

  const detail::ConvKind stage_kind[4] = {
      cfg.backbone == Backbone::R2Plus1D ? detail::ConvKind::Factorized : detail::ConvKind::Full3d,
      cfg.backbone == Backbone::R3D ? detail::ConvKind::Full3d
      : cfg.backbone == Backbone::MC3 ? detail::ConvKind::SpatialOnly
                                      : detail::ConvKind::Factorized,
      cfg.backbone == Backbone::R3D ? detail::ConvKind::Full3d
      : cfg.backbone == Backbone::MC3 ? detail::ConvKind::SpatialOnly
                                      : detail::ConvKind::Factorized,
      cfg.backbone == Backbone::R3D ? detail::ConvKind::Full3d
      : cfg.backbone == Backbone::MC3 ? detail::ConvKind::SpatialOnly
                                      : detail::ConvKind::Factorized,
  };

  // stem
  if (cfg.backbone == Backbone::R2Plus1D) {
    const int64_t mid = cfg.stem_midplanes();
    m.stem.conv = Conv3dT<T>::make(3, mid, {1, 7, 7}, {1, 2, 2}, {0, 3, 3}, false, rng());
    m.stem.mid_bn = BatchNorm3dT<T>::make(mid, T(cfg.bn_eps), T(cfg.bn_momentum));
    m.stem.temporal = Conv3dT<T>::make(mid, widths[0], {3, 1, 1}, {1, 1, 1}, {1, 0, 0}, false, rng());
  } else {
    m.stem.conv = Conv3dT<T>::make(3, widths[0], {3, 7, 7}, {1, 2, 2}, {1, 3, 3}, false, rng());
  }
  m.stem_bn = BatchNorm3dT<T>::make(widths[0], T(cfg.bn_eps), T(cfg.bn_momentum));
  detail::reg_unit(m, "stem", "stem", m.stem);
  detail::reg_bn(m, "stem", "stem.bn", m.stem_bn);

  // residual stages, two blocks each
  int64_t in_ch = widths[0];
  for (int stage = 0; stage < 4; ++stage) {
    const int64_t w = widths[size_t(stage)];
    const std::string stage_name = "layer" + std::to_string(stage + 1);
    for (int blk = 0; blk < 2; ++blk) {
      std::array<int64_t, 3> stride{1, 1, 1};
      if (stage > 0 && blk == 0)
        stride = cfg.backbone == Backbone::MC3 ? std::array<int64_t, 3>{1, 2, 2}
                                               : std::array<int64_t, 3>{2, 2, 2};
      ResBlockT<T> rb;
      // factorized blocks share one midplane value derived from the block's
      // input/output widths
      const int64_t mid = midplanes(3, 3, in_ch, w);
      rb.conv1 = detail::make_unit<T>(stage_kind[stage], in_ch, w, mid, stride, cfg, rng());
      rb.bn1 = BatchNorm3dT<T>::make(w, T(cfg.bn_eps), T(cfg.bn_momentum));
      rb.conv2 = detail::make_unit<T>(stage_kind[stage], w, w, mid, {1, 1, 1}, cfg, rng());
      rb.bn2 = BatchNorm3dT<T>::make(w, T(cfg.bn_eps), T(cfg.bn_momentum));
      if (in_ch != w || stride != std::array<int64_t, 3>{1, 1, 1}) {
        rb.down = Conv3dT<T>::make(in_ch, w, {1, 1, 1}, stride, {0, 0, 0}, false, rng());
        rb.down_bn = BatchNorm3dT<T>::make(w, T(cfg.bn_eps), T(cfg.bn_momentum));
      }
      const std::string prefix = stage_name + "." + std::to_string(blk);
      detail::reg_unit(m, stage_name, prefix + ".conv1", rb.conv1);
      detail::reg_bn(m, stage_name, prefix + ".bn1", rb.bn1);
      detail::reg_unit(m, stage_name, prefix + ".conv2", rb.conv2);
      detail::reg_bn(m, stage_name, prefix + ".bn2", rb.bn2);
      if (rb.down) {
        detail::reg_conv(m, stage_name, prefix + ".down", *rb.down);
        detail::reg_bn(m, stage_name, prefix + ".down_bn", *rb.down_bn);
      }
      m.stages[size_t(stage)].push_back(std::move(rb));
      in_ch = w;
    }
  }

  // attention insertions: blocks listed per stage, applied after that stage's
  // second residual block
  struct Site {
    int stage;
    char kind;  // s = SE, m = temporal MHA, c = CBAM, t = TCN
  };
  std::vector<Site> sites;
  switch (cfg.variant) {
    case Variant::Backbone:
    case Variant::FCSpatial:
    case Variant::FCTemporal: break;
    case Variant::ThreeSE: sites = {{2, 's'}}; break;
    case Variant::ThreeTemporal: sites = {{2, 'm'}}; break;
    case Variant::ThreeBoth: sites = {{2, 's'}, {2, 'm'}}; break;
    case Variant::ThreeCBAM: sites = {{2, 'c'}}; break;
    case Variant::ThreeTCN: sites = {{2, 't'}}; break;
    case Variant::AllSE: sites = {{0, 's'}, {1, 's'}, {2, 's'}}; break;
    case Variant::AllTemporal: sites = {{0, 'm'}, {1, 'm'}, {2, 'm'}}; break;
    case Variant::AllTogether:
      sites = {{0, 's'}, {0, 'm'}, {1, 's'}, {1, 'm'}, {2, 's'}, {2, 'm'}};
      break;
  }
  for (const Site& s : sites) {
    AttnBlockT<T> blk =
        detail::make_attn_block<T>(s.kind, widths[size_t(s.stage)], AttnAxis::Temporal, cfg, rng());
    const std::string stage_name = "attn" + std::to_string(s.stage + 1);
    const std::string prefix =
        stage_name + "." + std::to_string(m.stage_attn[size_t(s.stage)].size());
    detail::reg_attn(m, stage_name, prefix, blk);
    m.stage_attn[size_t(s.stage)].push_back(std::move(blk));
  }

  // every non-backbone variant keeps one attention block before pooling:
  // spatial for FC-Spatial, temporal otherwise
  if (cfg.variant != Variant::Backbone) {
    AttnAxis axis = cfg.variant == Variant::FCSpatial ? AttnAxis::Spatial : AttnAxis::Temporal;
    m.final_attn =
        MultiHeadAttnT<T>::make(widths[3], cfg.heads, axis, rng(), cfg.mha_layernorm, cfg.mha_posenc);
    detail::reg_mha(m, "final", "final.mha", *m.final_attn);
  }

  m.fc = LinearT<T>::make(widths[3], cfg.classes, rng());
  detail::reg_linear(m, "fc", "fc", m.fc);
  return m;
}

/// Forward pass to logits. `rng` feeds the dropout mask in train mode.
template <typename T>
TensorT<T> forward(ModelT<T>& m, const TensorT<T>& batch, Mode mode, const Rng& rng = Rng(0)) {
  if (batch.rank() != 5 || batch.shape()[1] != 3 || batch.shape()[2] != m.cfg.frames ||
      batch.shape()[3] != m.cfg.side || batch.shape()[4] != m.cfg.side)
    fail(ErrorKind::Shape, "batch shape " + shape_str(batch.shape()) + " does not match config (N,3," +
                               std::to_string(m.cfg.frames) + "," + std::to_string(m.cfg.side) + "," +
                               std::to_string(m.cfg.side) + ")");

  TensorT<T> x = relu(batchnorm3d_forward(m.stem.forward(batch, mode), m.stem_bn, mode));
  check_finite(x, "stem");
  for (int stage = 0; stage < 4; ++stage) {
    for (auto& rb : m.stages[size_t(stage)]) x = rb.forward(x, mode);
    check_finite(x, "layer" + std::to_string(stage + 1));
    for (auto& ab : m.stage_attn[size_t(stage)]) {
      x = attn_block_forward(x, ab);
      check_finite(x, "attn" + std::to_string(stage + 1));
    }
  }
  if (m.final_attn) {
    x = mha_forward(x, *m.final_attn);
    check_finite(x, "final-attention");
  }
  TensorT<T> logits = pool_linear_dropout(x, m.fc, T(m.cfg.dropout_p), mode, rng);
  check_finite(logits, "logits");
  return logits;
}

// ---- parameter audit -------------------------------------------------------------

struct ParamAudit {
  int64_t total = 0;
  double millions = 0.0;  // rounded half away from zero to 2 decimals
  std::vector<std::pair<std::string, int64_t>> per_stage;
};

inline double round_millions_2dp(int64_t total) {
  // integer arithmetic: count of 0.01M units, half away from zero
  const int64_t hundredths = (total >= 0 ? total + 5000 : total - 5000) / 10000;
  return double(hundredths) / 100.0;
}

template <typename T>
ParamAudit param_audit(const ModelT<T>& m) {
  ParamAudit a;
  std::vector<std::pair<std::string, int64_t>> order;
  std::map<std::string, size_t> pos;
  for (const auto& p : m.registry) {
    if (!p.learnable) continue;
    a.total += p.tensor.numel();
    auto it = pos.find(p.stage);
    if (it == pos.end()) {
      pos[p.stage] = order.size();
      order.emplace_back(p.stage, p.tensor.numel());
    } else {
      order[it->second].second += p.tensor.numel();
    }
  }
  a.millions = round_millions_2dp(a.total);
  a.per_stage = std::move(order);
  return a;
}

// ---- checkpoints -------------------------------------------------------------------

inline constexpr char kCheckpointMagic[4] = {'A', 'T', 'C', 'K'};
inline constexpr uint16_t kCheckpointVersion = 1;

template <typename T>
void checkpoint_save(const ModelT<T>& m, const std::filesystem::path& path,
                     const std::string& extra_header = "") {
  AtomicFile file(path);
  std::ostream& os = file.stream();
  os.write(kCheckpointMagic, 4);
  const std::string header = m.cfg.to_kv() + extra_header;
  detail::put_u16(os, kCheckpointVersion);
  detail::put_u32(os, uint32_t(header.size()));
  os.write(header.data(), std::streamsize(header.size()));
  detail::put_u32(os, uint32_t(m.registry.size()));
  for (const auto& p : m.registry) {
    detail::put_u16(os, uint16_t(p.name.size()));
    os.write(p.name.data(), std::streamsize(p.name.size()));
    write_tensor(os, p.tensor);
  }
  file.commit();
}

inline ModelConfig parse_model_config_kv(const std::string& text) {
  ModelConfig cfg;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string k = line.substr(0, eq), v = line.substr(eq + 1);
    if (k == "backbone") cfg.backbone = parse_backbone(v);
    else if (k == "variant") cfg.variant = parse_variant(v);
    else if (k == "classes") cfg.classes = std::stoll(v);
    else if (k == "width_scale") cfg.width_scale = std::stod(v);
    else if (k == "frames") cfg.frames = std::stoll(v);
    else if (k == "side") cfg.side = std::stoll(v);
    else if (k == "heads") cfg.heads = std::stoll(v);
    else if (k == "se_reduction") cfg.se_reduction = std::stoll(v);
    else if (k == "cbam_reduction") cfg.cbam_reduction = std::stoll(v);
    else if (k == "cbam_time_kernel") cfg.cbam_time_kernel = std::stoll(v);
    else if (k == "mha_layernorm") cfg.mha_layernorm = v == "1";
    else if (k == "mha_posenc") cfg.mha_posenc = v == "1";
    else if (k == "dropout_p") cfg.dropout_p = std::stod(v);
    else if (k == "bn_eps") cfg.bn_eps = std::stod(v);
    else if (k == "bn_momentum") cfg.bn_momentum = std::stod(v);
  }
  return cfg;
}

/// Reads only the key=value header of a checkpoint.
inline ModelConfig read_checkpoint_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::Io, "cannot open checkpoint " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    fail(ErrorKind::Container, "bad checkpoint magic in " + path.string());
  if (detail::get_u16(is) != kCheckpointVersion) fail(ErrorKind::Container, "unsupported checkpoint version");
  uint32_t header_len = detail::get_u32(is);
  std::string header(header_len, '\0');
  is.read(header.data(), std::streamsize(header_len));
  if (!is) fail(ErrorKind::Container, "truncated checkpoint header");
  return parse_model_config_kv(header);
}

template <typename T>
ModelT<T> checkpoint_load(const std::filesystem::path& path, const ModelConfig& cfg) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::Io, "cannot open checkpoint " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    fail(ErrorKind::Container, "bad checkpoint magic in " + path.string());
  uint16_t version = detail::get_u16(is);
  if (version != kCheckpointVersion) fail(ErrorKind::Container, "unsupported checkpoint version");
  uint32_t header_len = detail::get_u32(is);
  std::string header(header_len, '\0');
  is.read(header.data(), std::streamsize(header_len));
  uint32_t count = detail::get_u32(is);
  if (!is) fail(ErrorKind::Container, "truncated checkpoint header");

  // read everything first so a truncated file never yields a partial model
  std::vector<std::pair<std::string, TensorT<T>>> entries;
  entries.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    uint16_t name_len = detail::get_u16(is);
    std::string name(name_len, '\0');
    is.read(name.data(), std::streamsize(name_len));
    if (!is) fail(ErrorKind::Container, "truncated checkpoint entry name");
    entries.emplace_back(std::move(name), read_tensor<T>(is));
  }

  ModelT<T> m = build_model<T>(cfg, /*seed=*/0);
  std::map<std::string, TensorT<T>> by_name;
  for (auto& [n, t] : entries) by_name.emplace(n, t);

  std::vector<std::string> problems;
  for (auto& p : m.registry) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) {
      problems.push_back("missing " + p.name);
      continue;
    }
    if (it->second.shape() != p.tensor.shape()) {
      problems.push_back("shape mismatch " + p.name + " expected " + shape_str(p.tensor.shape()) +
                         " got " + shape_str(it->second.shape()));
      continue;
    }
    p.tensor.vec() = it->second.vec();
    by_name.erase(it);
  }
  for (auto& [n, t] : by_name) problems.push_back("unexpected " + n);
  if (!problems.empty()) {
    std::string msg = "checkpoint does not match model topology:";
    for (const auto& p : problems) msg += "\n  " + p;
    fail(ErrorKind::Checkpoint, msg);
  }
  return m;
}

}  // namespace vlab
