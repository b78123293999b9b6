#pragma once

#include <functional>
#include <limits>
#include <optional>

#include "vlab/model.hpp"
#include "vlab/pipeline.hpp"

namespace vlab {

struct TrainConfig {
  double lr0 = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  int64_t step_size = 15;  // epochs per learning-rate drop
  double gamma = 0.1;
  int64_t batch_size = 8;
  int64_t max_epochs = 45;
  int64_t patience = 5;
  double min_delta = 0.0;

  void validate() const {
    if (lr0 <= 0 || gamma <= 0 || step_size < 1) fail(ErrorKind::Config, "scheduler values must be positive");
    if (momentum < 0 || weight_decay < 0) fail(ErrorKind::Config, "momentum/weight decay must be >= 0");
    if (batch_size < 1 || max_epochs < 1) fail(ErrorKind::Config, "batch size and epochs must be >= 1");
    if (patience < 1) fail(ErrorKind::Config, "patience must be >= 1");
  }
};

struct EpochLog {
  int64_t epoch = 0;
  double lr = 0;
  double train_loss = 0;
  double val_top1 = 0;
  double val_top5 = 0;
  bool stopped_early = false;
};

struct Metrics {
  double top1 = 0;
  double top5 = 0;
  std::vector<double> per_class;  // percent, indexed by label
  std::vector<int64_t> class_total;
  std::vector<int64_t> class_correct;
  std::vector<std::vector<int64_t>> confusion;  // [true][predicted]
};

/// lr0 * gamma^floor((epoch-1)/step_size); epoch is 1-based.
inline double lr_at(int64_t epoch, const TrainConfig& cfg) {
  if (epoch < 1) fail(ErrorKind::Config, "epoch index is 1-based");
  return cfg.lr0 * std::pow(cfg.gamma, double((epoch - 1) / cfg.step_size));
}

/// Momentum-SGD core: g' = grad + wd*param; v <- momentum*v + g';
/// param <- param - lr*v. Decay applies to every parameter uniformly.
template <typename T>
void sgd_update(T* param, const T* grad, T* velocity, int64_t n, T lr, T momentum, T weight_decay) {
  for (int64_t i = 0; i < n; ++i) {
    const T g = (grad ? grad[i] : T(0)) + weight_decay * param[i];
    velocity[i] = momentum * velocity[i] + g;
    param[i] -= lr * velocity[i];
  }
}

template <typename T>
struct SgdStateT {
  std::vector<std::vector<T>> velocity;  // aligned with the learnable registry entries
};

template <typename T>
void sgd_step(std::vector<NamedTensor<T>>& registry, SgdStateT<T>& state, const TrainConfig& cfg,
              int64_t epoch) {
  const T lr = T(lr_at(epoch, cfg));
  size_t slot = 0;
  for (auto& p : registry) {
    if (!p.learnable) continue;
    if (state.velocity.size() <= slot) state.velocity.emplace_back(size_t(p.tensor.numel()), T(0));
    const T* grad = p.tensor.has_grad() ? p.tensor.grad().data() : nullptr;
    if (grad)
      for (int64_t i = 0; i < p.tensor.numel(); ++i)
        if (!std::isfinite(double(grad[i])))
          fail(ErrorKind::Numeric, "non-finite gradient in parameter " + p.name);
    sgd_update(p.tensor.data(), grad, state.velocity[slot].data(), p.tensor.numel(), lr,
               T(cfg.momentum), T(cfg.weight_decay));
    ++slot;
  }
}

template <typename T>
void zero_gradients(std::vector<NamedTensor<T>>& registry) {
  for (auto& p : registry)
    if (p.learnable) p.tensor.zero_grad();
}

/// Early stopping on a to-be-maximized metric: stop after `patience`
/// consecutive epochs without an improvement greater than `min_delta`.
struct EarlyStopper {
  int64_t patience = 5;
  double min_delta = 0.0;

  double best = -std::numeric_limits<double>::infinity();
  int64_t best_epoch = 0;
  int64_t epochs_since_improvement = 0;

  /// Returns true when training must stop after this epoch.
  bool observe(int64_t epoch, double value) {
    if (value > best + min_delta) {
      best = value;
      best_epoch = epoch;
      epochs_since_improvement = 0;
      return false;
    }
    return ++epochs_since_improvement >= patience;
  }
};

// ---- metrics ----------------------------------------------------------------------

/// Percentage of rows whose true label ranks within the top k probabilities;
/// ties resolve toward the lowest class index.
double topk_percent(const std::vector<std::vector<double>>& probs, std::span<const int64_t> labels,
                    int64_t k);

Metrics compute_metrics(const std::vector<std::vector<double>>& probs,
                        std::span<const int64_t> labels, int64_t num_classes);

/// Three-clip protocol: per video, average the softmax vectors of the
/// configured number of evaluation clips, then score.
Metrics evaluate(ModelT<float>& model, const std::vector<LabeledVideo>& data,
                 const PipelineConfig& pcfg, int64_t num_classes, const Rng& eval_rng);

// ---- training loop -----------------------------------------------------------------

struct TrainResult {
  std::vector<EpochLog> log;
  int64_t best_epoch = 0;
  double best_val_top1 = 0;
};

/// Paper-recipe loop: momentum SGD with step decay, per-epoch validation and
/// early stopping on validation top-1. The model is left holding the
/// best-validation parameters.
TrainResult train_loop(ModelT<float>& model, const std::vector<LabeledVideo>& train_data,
                       const std::vector<LabeledVideo>& val_data, const TrainConfig& cfg,
                       const PipelineConfig& pcfg, uint64_t seed,
                       std::function<void(const EpochLog&)> on_epoch = nullptr);

void write_epoch_log_csv(const std::filesystem::path& path, const std::vector<EpochLog>& log,
                         const std::vector<std::string>& header_comments);

}  // namespace vlab
