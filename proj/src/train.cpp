#include "vlab/train.hpp"

#include <fstream>

namespace vlab {

double topk_percent(const std::vector<std::vector<double>>& probs, std::span<const int64_t> labels,
                    int64_t k) {
  if (probs.empty()) fail(ErrorKind::Data, "no probability rows");
  const int64_t K = int64_t(probs[0].size());
  if (k < 1 || k > K) fail(ErrorKind::Config, "top-k out of range: k=" + std::to_string(k));
  if (labels.size() != probs.size()) fail(ErrorKind::Label, "label count mismatch");
  int64_t hits = 0;
  for (size_t r = 0; r < probs.size(); ++r) {
    const auto& p = probs[r];
    const int64_t truth = labels[r];
    if (truth < 0 || truth >= K) fail(ErrorKind::Label, "label out of range");
    int64_t rank = 0;
    for (int64_t j = 0; j < K; ++j) {
      if (p[size_t(j)] > p[size_t(truth)]) ++rank;
      else if (p[size_t(j)] == p[size_t(truth)] && j < truth) ++rank;
    }
    if (rank < k) ++hits;
  }
  return 100.0 * double(hits) / double(probs.size());
}

Metrics compute_metrics(const std::vector<std::vector<double>>& probs,
                        std::span<const int64_t> labels, int64_t num_classes) {
  Metrics m;
  m.top1 = topk_percent(probs, labels, 1);
  m.top5 = topk_percent(probs, labels, std::min<int64_t>(5, num_classes));
  m.class_total.assign(size_t(num_classes), 0);
  m.class_correct.assign(size_t(num_classes), 0);
  m.confusion.assign(size_t(num_classes), std::vector<int64_t>(size_t(num_classes), 0));
  for (size_t r = 0; r < probs.size(); ++r) {
    const auto& p = probs[r];
    int64_t pred = 0;
    for (int64_t j = 1; j < num_classes; ++j)
      if (p[size_t(j)] > p[size_t(pred)]) pred = j;  // lowest index wins ties
    const int64_t truth = labels[r];
    m.class_total[size_t(truth)]++;
    m.confusion[size_t(truth)][size_t(pred)]++;
    if (pred == truth) m.class_correct[size_t(truth)]++;
  }
  m.per_class.assign(size_t(num_classes), 0.0);
  for (int64_t c = 0; c < num_classes; ++c)
    if (m.class_total[size_t(c)] > 0)
      m.per_class[size_t(c)] = 100.0 * double(m.class_correct[size_t(c)]) / double(m.class_total[size_t(c)]);
  return m;
}

namespace {

Tensor stack_clips(const std::vector<ClipTensor>& clips) {
  const Shape& cs = clips[0].data.shape();
  Tensor batch({int64_t(clips.size()), cs[0], cs[1], cs[2], cs[3]});
  const int64_t per = clips[0].data.numel();
  for (size_t i = 0; i < clips.size(); ++i)
    std::copy_n(clips[i].data.data(), per, batch.data() + int64_t(i) * per);
  return batch;
}

}  // namespace

Metrics evaluate(ModelT<float>& model, const std::vector<LabeledVideo>& data,
                 const PipelineConfig& pcfg, int64_t num_classes, const Rng& eval_rng) {
  if (data.empty()) fail(ErrorKind::Data, "evaluation split is empty");
  std::vector<std::vector<double>> probs;
  std::vector<int64_t> labels;
  probs.reserve(data.size());
  for (size_t vi = 0; vi < data.size(); ++vi) {
    const auto& [video, label] = data[vi];
    if (label < 0 || label >= num_classes) fail(ErrorKind::Label, "label out of range in split");
    auto clips = eval_clips(video, pcfg, eval_rng.split(vi));
    Tensor batch = stack_clips(clips);
    Tensor logits = forward(model, batch, Mode::Eval);
    Tensor sm = softmax(logits, 1);
    std::vector<double> avg(size_t(num_classes), 0.0);
    for (int64_t r = 0; r < logits.shape()[0]; ++r)
      for (int64_t c = 0; c < num_classes; ++c) avg[size_t(c)] += double(sm.at({r, c}));
    for (auto& v : avg) v /= double(logits.shape()[0]);
    probs.push_back(std::move(avg));
    labels.push_back(label);
  }
  return compute_metrics(probs, labels, num_classes);
}

TrainResult train_loop(ModelT<float>& model, const std::vector<LabeledVideo>& train_data,
                       const std::vector<LabeledVideo>& val_data, const TrainConfig& cfg,
                       const PipelineConfig& pcfg, uint64_t seed,
                       std::function<void(const EpochLog&)> on_epoch) {
  cfg.validate();
  pcfg.validate();
  if (train_data.empty() || val_data.empty()) fail(ErrorKind::Data, "training and validation splits must be non-empty");
  int64_t num_classes = model.cfg.classes;

  Rng root(seed);
  const Rng order_rng = root.split(0);
  const Rng dropout_rng = root.split(4);
  const Rng eval_rng = root.split(3);  // fixed across epochs: comparable validation

  SgdStateT<float> sgd_state;
  TrainResult result;
  EarlyStopper stopper{cfg.patience, cfg.min_delta};

  // best-epoch snapshot of every registry tensor (parameters and BN state)
  std::vector<std::vector<float>> best_values;
  auto snapshot = [&]() {
    best_values.clear();
    for (const auto& p : model.registry) best_values.push_back(p.tensor.vec());
  };
  auto restore = [&]() {
    for (size_t i = 0; i < model.registry.size(); ++i) model.registry[i].tensor.vec() = best_values[i];
  };

  for (int64_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    // deterministic epoch ordering from the run seed
    std::vector<size_t> order(train_data.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng = order_rng.split(uint64_t(epoch));
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[size_t(shuffle_rng.next_below(uint64_t(i)))]);

    double loss_sum = 0.0;
    int64_t seen = 0;
    for (size_t pos = 0; pos < order.size(); pos += size_t(cfg.batch_size)) {
      const size_t end = std::min(order.size(), pos + size_t(cfg.batch_size));
      std::vector<ClipTensor> clips;
      std::vector<int64_t> labels;
      for (size_t b = pos; b < end; ++b) {
        const size_t di = order[b];
        const auto& [video, label] = train_data[di];
        clips.push_back(train_clip(video, pcfg,
                                   root.split(kTemporalStream).split(uint64_t(epoch)).split(di),
                                   root.split(kSpatialStream).split(uint64_t(epoch)).split(di)));
        labels.push_back(label);
      }
      Tensor batch = stack_clips(clips);

      Tape tape;
      {
        Tape::Scope scope(tape);
        zero_gradients(model.registry);
        Tensor logits = forward(model, batch, Mode::Train,
                                dropout_rng.split(uint64_t(epoch)).split(pos));
        Tensor loss = cross_entropy(logits, std::span<const int64_t>(labels));
        loss_sum += double(loss.item()) * double(labels.size());
        seen += int64_t(labels.size());
        backward(loss);
      }
      sgd_step(model.registry, sgd_state, cfg, epoch);
    }

    Metrics val = evaluate(model, val_data, pcfg, num_classes, eval_rng);
    EpochLog log;
    log.epoch = epoch;
    log.lr = lr_at(epoch, cfg);
    log.train_loss = loss_sum / double(seen);
    log.val_top1 = val.top1;
    log.val_top5 = val.top5;

    const bool was_best_epoch = val.top1 > stopper.best + cfg.min_delta;
    const bool stop = stopper.observe(epoch, val.top1);
    if (was_best_epoch) snapshot();
    result.best_epoch = stopper.best_epoch;
    result.best_val_top1 = stopper.best;
    log.stopped_early = stop;
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
    if (stop) break;
  }

  if (!best_values.empty()) restore();
  return result;
}

void write_epoch_log_csv(const std::filesystem::path& path, const std::vector<EpochLog>& log,
                         const std::vector<std::string>& header_comments) {
  AtomicFile file(path);
  std::ostream& os = file.stream();
  for (const auto& c : header_comments) os << "# " << c << "\n";
  os << "epoch,lr,train_loss,val_top1,val_top5,stopped\n";
  char buf[160];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%lld,%.6g,%.6f,%.2f,%.2f,%d\n", (long long)e.epoch, e.lr,
                  e.train_loss, e.val_top1, e.val_top5, e.stopped_early ? 1 : 0);
    os << buf;
  }
  file.commit();
}

}  // namespace vlab
