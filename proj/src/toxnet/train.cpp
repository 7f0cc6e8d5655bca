#include "cbctox/toxnet/train.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "cbctox/error.hpp"
#include "cbctox/nn/optim.hpp"
#include "cbctox/tensor_bridge.hpp"

namespace cbctox::tox {

std::array<double, 2> class_weights(const std::vector<int>& labels) {
  std::int64_t pos = 0;
  for (int y : labels) {
    require(y == 0 || y == 1, "domain", "class_weights: labels must be 0/1");
    pos += y;
  }
  require(pos > 0 && pos < std::int64_t(labels.size()), "domain",
          "class_weights: both classes must be present");
  const double freq1 = double(pos) / double(labels.size());
  const double freq0 = 1.0 - freq1;
  return {1.0 / (2.0 * freq0), 1.0 / (2.0 * freq1)};
}

namespace {

struct BatchTensors {
  nn::Tensor<float> cbct, jf, clinical, mask;
  std::vector<int> labels;
};

BatchTensors make_batch(const std::vector<Sample>& samples,
                        const std::vector<std::size_t>& idx, std::size_t b0,
                        std::size_t b1, const FusionConfig& cfg) {
  BatchTensors bt;
  std::vector<const Volume*> cbct, jf, mask;
  const std::int64_t n = std::int64_t(b1 - b0);
  bool any_mask = false;
  for (std::size_t i = b0; i < b1; ++i) {
    const Sample& s = samples[idx[i]];
    bt.labels.push_back(s.label);
    if (cfg.use_cbct) cbct.push_back(&s.cbct);
    if (cfg.use_jf) jf.push_back(&s.jf);
    if (!s.mask.data.empty()) any_mask = true;
  }
  if (any_mask)
    for (std::size_t i = b0; i < b1; ++i) mask.push_back(&samples[idx[i]].mask);
  if (cfg.use_cbct) bt.cbct = stack_volumes(cbct);
  if (cfg.use_jf) bt.jf = stack_volumes(jf);
  if (any_mask) bt.mask = stack_volumes(mask);
  if (cfg.use_clinical) {
    bt.clinical = nn::Tensor<float>::zeros({n, cfg.clinical_inputs});
    for (std::size_t i = b0; i < b1; ++i) {
      const auto& v = samples[idx[i]].clinical;
      for (std::int64_t j = 0; j < cfg.clinical_inputs; ++j)
        bt.clinical.data()[std::int64_t(i - b0) * cfg.clinical_inputs + j] =
            float(v[std::size_t(j)]);
    }
  }
  return bt;
}

struct EvalMetrics {
  double bacc = 0.5, sens = 0, spec = 0;
};

EvalMetrics eval_split(FusionModel<float>& model,
                       const std::vector<Sample>& samples, int batch) {
  const std::vector<double> p1 = predict_proba(model, samples, batch);
  std::int64_t tp = 0, fn = 0, tn = 0, fp = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const int pred = p1[i] > 0.5 ? 1 : 0;
    if (samples[i].label == 1)
      pred ? ++tp : ++fn;
    else
      pred ? ++fp : ++tn;
  }
  EvalMetrics m;
  m.sens = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
  m.spec = tn + fp > 0 ? double(tn) / double(tn + fp) : 0.0;
  m.bacc = (m.sens + m.spec) / 2.0;
  return m;
}

}  // namespace

std::vector<double> predict_proba(FusionModel<float>& model,
                                  const std::vector<Sample>& samples,
                                  int batch) {
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> out;
  for (std::size_t b0 = 0; b0 < samples.size(); b0 += std::size_t(batch)) {
    const std::size_t b1 =
        std::min(samples.size(), b0 + std::size_t(batch));
    BatchTensors bt = make_batch(samples, idx, b0, b1, model.cfg);
    auto probs = model.probabilities(bt.cbct, bt.jf, bt.clinical, bt.mask);
    for (std::size_t i = 0; i < b1 - b0; ++i)
      out.push_back(double(probs.data()[std::int64_t(i) * 2 + 1]));
  }
  return out;
}

TrainResult train_classifier(const std::vector<Sample>& train,
                             const std::vector<Sample>& val,
                             const FusionConfig& cfg,
                             const ClassifierTrainConfig& tcfg) {
  require(!train.empty(), "domain", "train_classifier: empty training set");
  std::vector<int> labels;
  for (const auto& s : train) labels.push_back(s.label);

  TrainResult result;
  result.weights = class_weights(labels);
  result.model = build_model<float>(cfg);

  nn::ParamList<float> params;
  result.model.params(params);
  nn::Adam<float> opt(params);

  const std::int64_t steps_per_epoch = std::int64_t(
      (train.size() + std::size_t(tcfg.batch) - 1) / std::size_t(tcfg.batch));
  nn::TrainSchedule sched;
  sched.max_lr = tcfg.lr;
  sched.total_steps = std::max<std::int64_t>(1, tcfg.epochs * steps_per_epoch);

  Rng rng(tcfg.seed ^ 0x7c1a55ull);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<float> best_snap;
  auto snapshot = [&] {
    std::vector<float> snap;
    for (auto& [name, t] : params)
      snap.insert(snap.end(), t.data(), t.data() + t.numel());
    return snap;
  };
  // batchnorm running stats belong to the checkpoint as well
  std::vector<std::pair<std::string, std::vector<float>*>> buffers;
  result.model.buffers(buffers);
  std::vector<std::vector<float>> best_buffers;
  auto snapshot_buffers = [&] {
    std::vector<std::vector<float>> out;
    for (auto& [name, v] : buffers) out.push_back(*v);
    return out;
  };

  double best_bacc = -1;
  std::int64_t step = 0;
  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    rng.shuffle(order.data(), order.size());
    double epoch_loss = 0;
    double epoch_lr = 0;
    std::int64_t batches = 0;
    for (std::size_t b0 = 0; b0 < order.size();
         b0 += std::size_t(tcfg.batch)) {
      const std::size_t b1 =
          std::min(order.size(), b0 + std::size_t(tcfg.batch));
      // batchnorm in training mode needs at least two samples
      if (b1 - b0 < 2 && order.size() > 1) continue;
      BatchTensors bt = make_batch(train, order, b0, b1, cfg);
      auto logits = result.model.forward(bt.cbct, bt.jf, bt.clinical, bt.mask,
                                         true);
      auto loss =
          nn::weighted_cross_entropy(logits, bt.labels, result.weights);
      opt.zero_grad();
      loss.backward();
      const double lr =
          nn::onecycle_lr(sched, std::min(step, sched.total_steps - 1));
      opt.step(lr);
      ++step;
      epoch_loss += double(loss.item());
      epoch_lr = lr;
      ++batches;
    }
    HistoryRow row;
    row.epoch = epoch;
    row.loss = batches ? epoch_loss / double(batches) : 0.0;
    row.lr = epoch_lr;
    if (!val.empty()) {
      const EvalMetrics m = eval_split(result.model, val, tcfg.batch);
      row.val_bacc = m.bacc;
      row.val_sens = m.sens;
      row.val_spec = m.spec;
      if (m.bacc > best_bacc) {
        best_bacc = m.bacc;
        best_snap = snapshot();
        best_buffers = snapshot_buffers();
      }
    }
    result.history.push_back(row);
  }
  if (!best_snap.empty()) {
    std::size_t off = 0;
    for (auto& [name, t] : params) {
      std::copy(best_snap.begin() + long(off),
                best_snap.begin() + long(off + t.numel()), t.data());
      off += std::size_t(t.numel());
    }
    for (std::size_t i = 0; i < buffers.size(); ++i)
      *buffers[i].second = best_buffers[i];
    result.best_val_bacc = best_bacc;
  }
  return result;
}

void write_history_csv(const std::vector<HistoryRow>& history,
                       const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  require(f.good(), "io", "cannot write history " + path.string());
  f << "epoch,loss,lr,val_bacc,val_sens,val_spec\n";
  for (const auto& r : history)
    f << r.epoch << ',' << r.loss << ',' << r.lr << ',' << r.val_bacc << ','
      << r.val_sens << ',' << r.val_spec << "\n";
}

}  // namespace cbctox::tox
