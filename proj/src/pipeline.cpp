#include "vlab/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "vlab/serialize.hpp"

namespace vlab {

void PipelineConfig::validate() const {
  if (min_frames < clip_len) fail(ErrorKind::Config, "min_frames must be >= clip_len");
  if (resize < crop) fail(ErrorKind::Config, "resize must be >= crop");
  if (clip_len < 1 || max_frames < 1) fail(ErrorKind::Config, "clip_len and max_frames must be >= 1");
  if (flip_prob < 0.0 || flip_prob > 1.0) fail(ErrorKind::Config, "flip_prob must be in [0,1]");
  if (eval_clips < 1) fail(ErrorKind::Config, "eval_clips must be >= 1");
}

std::vector<int64_t> cap_frame_indices(int64_t n, int64_t max) {
  std::vector<int64_t> idx;
  if (n <= max) {
    idx.resize(size_t(n));
    for (int64_t i = 0; i < n; ++i) idx[size_t(i)] = i;
    return idx;
  }
  idx.resize(size_t(max));
  for (int64_t i = 0; i < max; ++i)
    idx[size_t(i)] = int64_t(std::llround(double(i) * double(n - 1) / double(max - 1)));
  return idx;
}

std::vector<Image8> cap_frames(const RawVideo& video, int64_t max) {
  if (video.frames.empty()) fail(ErrorKind::Data, "video '" + video.id + "' has no frames");
  auto idx = cap_frame_indices(int64_t(video.frames.size()), max);
  std::vector<Image8> out;
  out.reserve(idx.size());
  for (int64_t i : idx) out.push_back(video.frames[size_t(i)]);
  return out;
}

std::vector<Image8> pad_min(std::vector<Image8> frames, int64_t min) {
  if (frames.empty()) fail(ErrorKind::Data, "cannot pad an empty frame list");
  while (int64_t(frames.size()) < min) frames.push_back(frames.back());
  return frames;
}

int64_t sample_clip_start(int64_t n, int64_t len, Rng& rng) {
  if (n < len) fail(ErrorKind::Data, "sequence shorter than clip length");
  return int64_t(rng.next_below(uint64_t(n - len + 1)));
}

Tensor transform_frames(const std::vector<Image8>& clip_frames, const PipelineConfig& cfg, bool flip,
                        float brightness, float contrast, float saturation) {
  const int64_t T = int64_t(clip_frames.size());
  const int64_t S = cfg.crop;
  Tensor out({3, T, S, S});
  float* po = out.data();
  for (int64_t t = 0; t < T; ++t) {
    const Image8& f = clip_frames[size_t(t)];
    if (f.width < 1 || f.height < 1) fail(ErrorKind::Image, "degenerate frame in clip");
    ImageF resized = resize_bilinear(f, cfg.resize, cfg.resize);
    ImageF cropped = center_crop(resized, cfg.crop);
    if (flip) hflip_inplace(cropped);
    apply_jitter(cropped, brightness, contrast, saturation);
    for (int64_t c = 0; c < 3; ++c) {
      const float mean = float(cfg.mean[size_t(c)]);
      const float stddev = float(cfg.stddev[size_t(c)]);
      float* plane = po + (c * T + t) * S * S;
      for (int64_t y = 0; y < S; ++y)
        for (int64_t x = 0; x < S; ++x)
          plane[y * S + x] = (cropped.at(y, x, c) / 255.0f - mean) / stddev;
    }
  }
  return out;
}

namespace {

std::vector<Image8> select_clip(std::vector<Image8>& frames, int64_t start, int64_t len) {
  return std::vector<Image8>(frames.begin() + start, frames.begin() + start + len);
}

void shuffle_clip(std::vector<Image8>& clip, Rng& rng) {
  for (int64_t i = int64_t(clip.size()) - 1; i > 0; --i) {
    int64_t j = int64_t(rng.next_below(uint64_t(i + 1)));
    std::swap(clip[size_t(i)], clip[size_t(j)]);
  }
}

}  // namespace

ClipTensor train_clip(const RawVideo& video, const PipelineConfig& cfg, Rng temporal_rng,
                      Rng spatial_rng) {
  cfg.validate();
  auto frames = pad_min(cap_frames(video, cfg.max_frames), cfg.min_frames);
  const int64_t start = sample_clip_start(int64_t(frames.size()), cfg.clip_len, temporal_rng);
  auto clip = select_clip(frames, start, cfg.clip_len);
  if (cfg.shuffle_frames) shuffle_clip(clip, temporal_rng);

  // one flip draw and one jitter draw per clip, shared by all frames
  const bool flip = spatial_rng.next_float() < float(cfg.flip_prob);
  const float fb = spatial_rng.uniform(float(1.0 - cfg.jitter_brightness), float(1.0 + cfg.jitter_brightness));
  const float fc = spatial_rng.uniform(float(1.0 - cfg.jitter_contrast), float(1.0 + cfg.jitter_contrast));
  const float fs = spatial_rng.uniform(float(1.0 - cfg.jitter_saturation), float(1.0 + cfg.jitter_saturation));

  ClipTensor ct;
  ct.data = transform_frames(clip, cfg, flip, fb, fc, fs);
  ct.video_id = video.id;
  ct.start_index = start;
  return ct;
}

std::vector<ClipTensor> eval_clips(const RawVideo& video, const PipelineConfig& cfg, Rng temporal_rng) {
  cfg.validate();
  auto frames = pad_min(cap_frames(video, cfg.max_frames), cfg.min_frames);
  std::vector<ClipTensor> out;
  out.reserve(size_t(cfg.eval_clips));
  for (int64_t k = 0; k < cfg.eval_clips; ++k) {
    const int64_t start = sample_clip_start(int64_t(frames.size()), cfg.clip_len, temporal_rng);
    auto clip = select_clip(frames, start, cfg.clip_len);
    if (cfg.shuffle_frames) shuffle_clip(clip, temporal_rng);
    ClipTensor ct;
    ct.data = transform_frames(clip, cfg, /*flip=*/false, 1.0f, 1.0f, 1.0f);
    ct.video_id = video.id;
    ct.start_index = start;
    out.push_back(std::move(ct));
  }
  return out;
}

// ---- manifests -----------------------------------------------------------------

int64_t SplitManifest::num_classes() const {
  int64_t mx = -1;
  for (const auto& e : entries) mx = std::max(mx, e.label);
  return mx + 1;
}

SplitManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::Io, "cannot open manifest " + path.string());
  SplitManifest m;
  m.name = path.stem().string();
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string key = "# class_names=";
      if (line.rfind(key, 0) == 0) {
        std::string names = line.substr(key.size());
        size_t pos = 0;
        while (pos <= names.size()) {
          size_t comma = names.find(',', pos);
          if (comma == std::string::npos) {
            m.class_names.push_back(names.substr(pos));
            break;
          }
          m.class_names.push_back(names.substr(pos, comma - pos));
          pos = comma + 1;
        }
      }
      continue;
    }
    size_t tab = line.find('\t');
    if (tab == std::string::npos) fail(ErrorKind::Data, "manifest line missing tab: " + line);
    ManifestEntry e;
    e.path = line.substr(0, tab);
    try {
      e.label = std::stoll(line.substr(tab + 1));
    } catch (const std::exception&) {
      fail(ErrorKind::Data, "manifest line has non-integer label: " + line);
    }
    m.entries.push_back(std::move(e));
  }
  if (m.entries.empty()) fail(ErrorKind::Data, "manifest " + path.string() + " has no entries");
  // labels must form a contiguous 0..K-1 set
  std::set<int64_t> labels;
  for (const auto& e : m.entries) labels.insert(e.label);
  int64_t expect = 0;
  for (int64_t l : labels)
    if (l != expect++) fail(ErrorKind::Data, "manifest labels are not contiguous from 0");
  return m;
}

void save_manifest(const std::filesystem::path& path, const SplitManifest& manifest,
                   const std::vector<std::string>& header_comments) {
  AtomicFile file(path);
  std::ostream& os = file.stream();
  for (const auto& c : header_comments) os << "# " << c << "\n";
  if (!manifest.class_names.empty()) {
    os << "# class_names=";
    for (size_t i = 0; i < manifest.class_names.size(); ++i)
      os << (i ? "," : "") << manifest.class_names[i];
    os << "\n";
  }
  for (const auto& e : manifest.entries) os << e.path << "\t" << e.label << "\n";
  file.commit();
}

RawVideo load_video_dir(const std::filesystem::path& dir, const std::string& id) {
  std::vector<std::filesystem::path> files;
  if (!std::filesystem::is_directory(dir)) fail(ErrorKind::Io, "video directory missing: " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.path().extension() == ".png") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) fail(ErrorKind::Data, "no frames in " + dir.string());
  RawVideo v;
  v.id = id;
  v.frames.reserve(files.size());
  for (const auto& f : files) v.frames.push_back(decode_png(f));
  for (const auto& f : v.frames)
    if (f.width != v.frames[0].width || f.height != v.frames[0].height)
      fail(ErrorKind::Data, "frame dimensions differ within " + dir.string());
  return v;
}

std::vector<LabeledVideo> load_dataset(const std::filesystem::path& manifest_path) {
  SplitManifest m = load_manifest(manifest_path);
  const std::filesystem::path base = manifest_path.parent_path();
  std::vector<LabeledVideo> out;
  out.reserve(m.entries.size());
  for (const auto& e : m.entries)
    out.emplace_back(load_video_dir(base / e.path, e.path), e.label);
  return out;
}

// ---- synthetic motion dataset ------------------------------------------------------

const std::vector<std::string>& synth_class_names() {
  static const std::vector<std::string> names{"drift-up", "drift-down", "drift-left", "drift-right"};
  return names;
}

namespace {

RawVideo make_motion_video(const SynthConfig& cfg, int64_t label, int64_t index, Rng rng) {
  const int64_t S = cfg.side;
  const int64_t square = std::max<int64_t>(4, S / 4);
  const int64_t speed = 2;

  // static textured-noise background, one brightness level per video
  std::vector<uint8_t> background(size_t(S * S * 3));
  for (size_t i = 0; i < background.size(); ++i)
    background[i] = uint8_t(40 + rng.next_below(100));
  const uint8_t bright = uint8_t(205 + rng.next_below(50));

  int64_t x = int64_t(rng.next_below(uint64_t(S)));
  int64_t y = int64_t(rng.next_below(uint64_t(S)));
  int64_t dx = 0, dy = 0;
  switch (label) {
    case 0: dy = -speed; break;
    case 1: dy = speed; break;
    case 2: dx = -speed; break;
    case 3: dx = speed; break;
    default: fail(ErrorKind::Config, "synthetic dataset supports 4 classes");
  }

  RawVideo v;
  // ids carry the split name so train/val videos never collide on disk
  v.id = cfg.split_name + "-" + synth_class_names()[size_t(label)] + "_" + std::to_string(index);
  v.frames.reserve(size_t(cfg.frames));
  for (int64_t t = 0; t < cfg.frames; ++t) {
    Image8 frame;
    frame.width = S;
    frame.height = S;
    frame.rgb = background;
    for (int64_t sy = 0; sy < square; ++sy)
      for (int64_t sx = 0; sx < square; ++sx) {
        const int64_t py = ((y + sy) % S + S) % S;  // wraparound keeps direction intact
        const int64_t px = ((x + sx) % S + S) % S;
        for (int64_t c = 0; c < 3; ++c) frame.at(py, px, c) = bright;
      }
    v.frames.push_back(std::move(frame));
    x += dx;
    y += dy;
  }
  return v;
}

}  // namespace

std::vector<LabeledVideo> synth_motion_videos(const SynthConfig& cfg) {
  if (cfg.classes != 4) fail(ErrorKind::Config, "synthetic dataset supports exactly 4 direction classes");
  if (cfg.side < 16) fail(ErrorKind::Config, "synthetic side must be >= 16");
  if (cfg.frames < 8) fail(ErrorKind::Config, "synthetic frame count must be >= 8");
  Rng root(cfg.seed);
  // distinct stream family per split name so train/val never share videos
  uint64_t split_tag = 0;
  for (char ch : cfg.split_name) split_tag = split_tag * 131 + uint64_t(uint8_t(ch));
  Rng split_rng = root.split(split_tag);

  std::vector<LabeledVideo> out;
  out.reserve(size_t(cfg.classes * cfg.per_class));
  for (int64_t label = 0; label < cfg.classes; ++label)
    for (int64_t i = 0; i < cfg.per_class; ++i)
      out.emplace_back(make_motion_video(cfg, label, i, split_rng.split(uint64_t(label * cfg.per_class + i))),
                       label);
  return out;
}

SplitManifest synth_motion_dataset(const std::filesystem::path& out_dir, const SynthConfig& cfg,
                                   const std::vector<std::string>& header_comments) {
  auto videos = synth_motion_videos(cfg);
  std::filesystem::create_directories(out_dir);
  SplitManifest m;
  m.name = cfg.split_name;
  m.class_names = synth_class_names();
  for (const auto& [video, label] : videos) {
    const std::string rel = video.id;
    const std::filesystem::path vdir = out_dir / rel;
    std::filesystem::create_directories(vdir);
    for (size_t t = 0; t < video.frames.size(); ++t) {
      char name[16];
      std::snprintf(name, sizeof(name), "%05zu.png", t);
      encode_png(vdir / name, video.frames[t]);
    }
    m.entries.push_back({rel, label});
  }
  save_manifest(out_dir / (cfg.split_name + ".manifest"), m, header_comments);
  return m;
}

}  // namespace vlab
