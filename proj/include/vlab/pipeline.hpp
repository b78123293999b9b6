#pragma once

#include <array>
#include <optional>
#include <string>

#include "vlab/image.hpp"
#include "vlab/rng.hpp"
#include "vlab/tensor.hpp"

namespace vlab {

struct RawVideo {
  std::string id;
  std::vector<Image8> frames;
  double fps = 25.0;
};

/// Normalized network input plus provenance.
struct ClipTensor {
  Tensor data;  // [3, clip_len, crop, crop]
  std::string video_id;
  int64_t start_index = 0;
};

struct PipelineConfig {
  int64_t max_frames = 48;
  int64_t min_frames = 32;
  int64_t clip_len = 16;
  int64_t resize = 256;
  int64_t crop = 224;
  double jitter_brightness = 0.2;
  double jitter_contrast = 0.2;
  double jitter_saturation = 0.2;
  double flip_prob = 0.5;
  std::array<double, 3> mean{0.43216, 0.394666, 0.37645};
  std::array<double, 3> stddev{0.22803, 0.22145, 0.216989};
  int64_t eval_clips = 3;
  // diagnostic switch: permute the frames of every sampled clip, destroying
  // temporal order while leaving per-frame appearance untouched
  bool shuffle_frames = false;

  void validate() const;
};

// Stream-splitting contract: every sample derives from the run seed as
// root.split(kTemporalStream/kSpatialStream).split(epoch).split(sample index),
// so data order and augmentations replay exactly.
inline constexpr uint64_t kTemporalStream = 1;
inline constexpr uint64_t kSpatialStream = 2;

/// Uniform subsampling indices: all of 0..n-1 when n <= max, otherwise
/// round(i*(n-1)/(max-1)) for i = 0..max-1 (endpoints included).
std::vector<int64_t> cap_frame_indices(int64_t n, int64_t max);

std::vector<Image8> cap_frames(const RawVideo& video, int64_t max);

/// Repeats the last frame until the sequence reaches `min` frames.
std::vector<Image8> pad_min(std::vector<Image8> frames, int64_t min);

/// Start index uniform over [0, n - len].
int64_t sample_clip_start(int64_t n, int64_t len, Rng& rng);

/// Full training path: cap, pad, sample a clip, then the augmenting spatial
/// transform. `temporal_rng` drives start/shuffle draws, `spatial_rng` the
/// flip/jitter draws.
ClipTensor train_clip(const RawVideo& video, const PipelineConfig& cfg, Rng temporal_rng,
                      Rng spatial_rng);

/// Deterministic spatial transform of already-selected frames (resize, crop,
/// optional flip and jitter factors, scale to [0,1], normalize).
Tensor transform_frames(const std::vector<Image8>& clip_frames, const PipelineConfig& cfg, bool flip,
                        float brightness, float contrast, float saturation);

/// Evaluation path: three clips with independent random starts, no photometric
/// or geometric augmentation.
std::vector<ClipTensor> eval_clips(const RawVideo& video, const PipelineConfig& cfg, Rng temporal_rng);

// ---- dataset on disk ---------------------------------------------------------

struct ManifestEntry {
  std::string path;  // relative directory of numbered PNG frames
  int64_t label = 0;
};

struct SplitManifest {
  std::string name;
  std::vector<ManifestEntry> entries;
  std::vector<std::string> class_names;  // optional; indexed by label

  int64_t num_classes() const;
};

SplitManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const SplitManifest& manifest,
                   const std::vector<std::string>& header_comments);

RawVideo load_video_dir(const std::filesystem::path& dir, const std::string& id);

using LabeledVideo = std::pair<RawVideo, int64_t>;
std::vector<LabeledVideo> load_dataset(const std::filesystem::path& manifest_path);

// ---- synthetic motion dataset --------------------------------------------------

struct SynthConfig {
  int64_t classes = 4;  // up, down, left, right
  int64_t per_class = 50;
  int64_t side = 32;
  int64_t frames = 12;
  uint64_t seed = 1;
  std::string split_name = "train";
};

/// One bright square drifting over textured noise; the class is the drift
/// direction and every single frame is marginally class-uninformative.
SplitManifest synth_motion_dataset(const std::filesystem::path& out_dir, const SynthConfig& cfg,
                                   const std::vector<std::string>& header_comments = {});

/// In-memory variant used by tests and the training harness.
std::vector<LabeledVideo> synth_motion_videos(const SynthConfig& cfg);

const std::vector<std::string>& synth_class_names();

}  // namespace vlab
