#include "vlab/config.hpp"

#include <fstream>

namespace vlab {

RunConfig::RunConfig() {
  values_ = {
      {"seed", "1"},
      {"data.max_frames", "48"},
      {"data.min_frames", "32"},
      {"data.clip_len", "16"},
      {"data.resize", "256"},
      {"data.crop", "224"},
      {"data.jitter_brightness", "0.2"},
      {"data.jitter_contrast", "0.2"},
      {"data.jitter_saturation", "0.2"},
      {"data.flip_prob", "0.5"},
      {"data.mean_r", "0.43216"},
      {"data.mean_g", "0.394666"},
      {"data.mean_b", "0.37645"},
      {"data.std_r", "0.22803"},
      {"data.std_g", "0.22145"},
      {"data.std_b", "0.216989"},
      {"data.eval_clips", "3"},
      {"data.shuffle_frames", "0"},
      {"model.backbone", "r3d"},
      {"model.variant", "backbone"},
      {"model.classes", "101"},
      {"model.width_scale", "1"},
      {"model.frames", "16"},
      {"model.side", "224"},
      {"model.heads", "4"},
      {"model.se_reduction", "2"},
      {"model.cbam_reduction", "16"},
      {"model.cbam_time_kernel", "7"},
      {"model.mha_layernorm", "0"},
      {"model.mha_posenc", "0"},
      {"model.dropout", "0.4"},
      {"bn.eps", "1e-5"},
      {"bn.momentum", "0.1"},
      {"train.lr0", "0.001"},
      {"train.momentum", "0.9"},
      {"train.weight_decay", "0.0005"},
      {"train.step_size", "15"},
      {"train.gamma", "0.1"},
      {"train.batch_size", "8"},
      {"train.max_epochs", "45"},
      {"train.patience", "5"},
      {"train.min_delta", "0"},
  };
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) fail(ErrorKind::Config, "unknown config key '" + key + "'");
  it->second = value;
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::Io, "cannot open config file " + path.string());
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Config, "config line missing '=': " + line);
    set(line.substr(0, eq), line.substr(eq + 1));
  }
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) fail(ErrorKind::Config, "unknown config key '" + key + "'");
  return it->second;
}

int64_t RunConfig::get_int(const std::string& key) const {
  try {
    return std::stoll(get(key));
  } catch (const std::exception&) {
    fail(ErrorKind::Config, "config key '" + key + "' is not an integer: " + get(key));
  }
}

double RunConfig::get_double(const std::string& key) const {
  try {
    return std::stod(get(key));
  } catch (const std::exception&) {
    fail(ErrorKind::Config, "config key '" + key + "' is not a number: " + get(key));
  }
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "0" || v == "false") return false;
  if (v == "1" || v == "true") return true;
  fail(ErrorKind::Config, "config key '" + key + "' is not a boolean: " + v);
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.backbone = parse_backbone(get("model.backbone"));
  m.variant = parse_variant(get("model.variant"));
  m.classes = get_int("model.classes");
  m.width_scale = get_double("model.width_scale");
  m.frames = get_int("model.frames");
  m.side = get_int("model.side");
  m.heads = get_int("model.heads");
  m.se_reduction = get_int("model.se_reduction");
  m.cbam_reduction = get_int("model.cbam_reduction");
  m.cbam_time_kernel = get_int("model.cbam_time_kernel");
  m.mha_layernorm = get_bool("model.mha_layernorm");
  m.mha_posenc = get_bool("model.mha_posenc");
  m.dropout_p = get_double("model.dropout");
  m.bn_eps = get_double("bn.eps");
  m.bn_momentum = get_double("bn.momentum");
  return m;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.lr0 = get_double("train.lr0");
  t.momentum = get_double("train.momentum");
  t.weight_decay = get_double("train.weight_decay");
  t.step_size = get_int("train.step_size");
  t.gamma = get_double("train.gamma");
  t.batch_size = get_int("train.batch_size");
  t.max_epochs = get_int("train.max_epochs");
  t.patience = get_int("train.patience");
  t.min_delta = get_double("train.min_delta");
  return t;
}

PipelineConfig RunConfig::pipeline_config() const {
  PipelineConfig p;
  p.max_frames = get_int("data.max_frames");
  p.min_frames = get_int("data.min_frames");
  p.clip_len = get_int("data.clip_len");
  p.resize = get_int("data.resize");
  p.crop = get_int("data.crop");
  p.jitter_brightness = get_double("data.jitter_brightness");
  p.jitter_contrast = get_double("data.jitter_contrast");
  p.jitter_saturation = get_double("data.jitter_saturation");
  p.flip_prob = get_double("data.flip_prob");
  p.mean = {get_double("data.mean_r"), get_double("data.mean_g"), get_double("data.mean_b")};
  p.stddev = {get_double("data.std_r"), get_double("data.std_g"), get_double("data.std_b")};
  p.eval_clips = get_int("data.eval_clips");
  p.shuffle_frames = get_bool("data.shuffle_frames");
  return p;
}

std::vector<std::string> RunConfig::header_lines() const {
  std::vector<std::string> out;
  out.push_back(std::string("tool=vlab ") + kToolVersion);
  for (const auto& [k, v] : values_) out.push_back(k + "=" + v);
  return out;
}

}  // namespace vlab
