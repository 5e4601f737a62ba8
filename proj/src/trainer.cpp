// SPDX-License-Identifier: Apache-2.0

#include "sememe_rnn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace sememe {

using ad::Index;
using ad::Matrix;
using ad::Tensor;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct Snapshot {
  std::vector<Matrix> values;

  static Snapshot take(const std::vector<NamedTensor>& params) {
    Snapshot s;
    for (const auto& p : params) s.values.push_back(p.tensor.value());
    return s;
  }
  void restore(const std::vector<NamedTensor>& params) const {
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor t = params[i].tensor;
      t.mutable_value() = values[i];
    }
  }
};

cells::CellState detached(const cells::CellState& s) {
  cells::CellState out;
  out.h = s.h.detach();
  if (s.c.defined()) out.c = s.c.detach();
  return out;
}

StepInfo apply_update(std::span<Tensor> params, SgdOptimizer& opt, double lr, double clip_norm) {
  StepInfo info;
  info.grad_norm = global_grad_norm(params);
  clip_gradients(params, clip_norm);
  info.clipped_norm = global_grad_norm(params);
  opt.step(params, lr);
  return info;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

std::string_view preset_name(Preset preset) {
  switch (preset) {
    case Preset::Tiny: return "tiny";
    case Preset::Desk: return "desk";
    case Preset::Medium: return "medium";
    case Preset::Large: return "large";
    case Preset::Custom: return "custom";
  }
  return "custom";
}

Preset parse_preset(std::string_view name) {
  for (Preset p : {Preset::Tiny, Preset::Desk, Preset::Medium, Preset::Large, Preset::Custom}) {
    if (preset_name(p) == name) return p;
  }
  throw std::invalid_argument("unknown preset '" + std::string(name) +
                              "' (tiny|desk|medium|large|custom)");
}

void TrainConfig::validate() const {
  auto positive = [](double v, const char* field) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string(field) + " must be positive");
  };
  positive(initial_lr, "initial_lr");
  positive(lr_divisor, "lr_divisor");
  positive(clip_norm, "clip_norm");
  positive(max_epochs, "max_epochs");
  positive(static_cast<double>(batch_size), "batch_size");
  positive(static_cast<double>(bptt_len), "bptt_len");
  positive(static_cast<double>(eval_batch_size), "eval_batch_size");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("momentum must be in [0, 1)");
  }
}

ModelDims preset_dims(Preset preset) {
  switch (preset) {
    case Preset::Tiny: return {32, 32, 32};
    case Preset::Desk: return {64, 64, 64};
    case Preset::Medium: return {650, 650, 650};
    case Preset::Large: return {1500, 1500, 1500};
    case Preset::Custom: return {64, 64, 64};
  }
  return {};
}

TrainConfig lm_preset(Preset preset, cells::Base base) {
  TrainConfig c;
  c.preset = preset;
  c.initial_lr = base == cells::Base::Lstm ? 20.0 : 10.0;
  c.lr_divisor = 4.0;
  c.clip_norm = 0.25;
  c.max_epochs = 40;
  c.batch_size = 20;
  c.bptt_len = 35;
  c.dropout = 0.5;
  switch (preset) {
    case Preset::Large:
      c.dropout = 0.65;
      break;
    case Preset::Desk:
      c.max_epochs = 12;  // one-core CPU budget
      break;
    case Preset::Tiny:
      c.dropout = 0.0;
      c.max_epochs = 10;
      break;
    case Preset::Medium:
    case Preset::Custom:
      break;
  }
  return c;
}

TrainConfig pair_preset(Preset preset) {
  TrainConfig c = lm_preset(preset, cells::Base::Lstm);
  c.initial_lr = 0.1;
  c.lr_divisor = 5.0;
  c.momentum = 0.99;
  if (preset != Preset::Tiny) c.dropout = 0.2;
  return c;
}

ModelDims pair_preset_dims(Preset preset) {
  if (preset == Preset::Medium || preset == Preset::Large) return {300, 2048, 300};
  return preset_dims(preset);
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose) {
  return splitmix64(root ^ splitmix64(fnv1a(purpose)));
}

// ---------------------------------------------------------------------------
// Optimization primitives

void init_params(const std::vector<NamedTensor>& params, std::uint64_t seed) {
  const double stddev = std::sqrt(kInitVariance);
  for (auto [name, t] : params) {
    if (!t.requires_grad()) continue;
    Matrix& m = t.mutable_value();
    if (is_bias_name(name)) {
      m.setZero();
      continue;
    }
    std::mt19937_64 rng(derive_seed(seed, "init/" + name));
    std::normal_distribution<double> normal(0.0, stddev);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  }
}

std::vector<Tensor> trainable(const std::vector<NamedTensor>& params) {
  std::vector<Tensor> out;
  for (const auto& p : params) {
    if (p.tensor.requires_grad()) out.push_back(p.tensor);
  }
  return out;
}

double global_grad_norm(std::span<const Tensor> params) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (p.has_grad()) sq += p.grad().squaredNorm();
  }
  return std::sqrt(sq);
}

double clip_gradients(std::span<Tensor> params, double clip_norm) {
  const double norm = global_grad_norm(params);
  if (!(norm > clip_norm)) return 1.0;
  const double factor = clip_norm / norm;
  for (auto& p : params) {
    if (p.has_grad()) p.mutable_grad() *= factor;
  }
  return factor;
}

void sgd_step(std::span<Tensor> params, double lr) {
  for (auto& p : params) {
    if (!p.requires_grad()) continue;
    if (p.has_grad()) p.mutable_value() -= lr * p.grad();
    p.zero_grad();
  }
}

void SgdOptimizer::step(std::span<Tensor> params, double lr) {
  if (momentum_ == 0.0) {
    sgd_step(params, lr);
    return;
  }
  for (auto& p : params) {
    if (!p.requires_grad()) continue;
    Matrix& v = velocity_[p.node().get()];
    if (v.size() == 0) v = Matrix::Zero(p.rows(), p.cols());
    v *= momentum_;
    if (p.has_grad()) v += p.grad();
    p.mutable_value() -= lr * v;
    p.zero_grad();
  }
}

// ---------------------------------------------------------------------------
// Schedule and logging

std::string format_epoch_record(const EpochRecord& r) {
  std::ostringstream out;
  out.precision(17);
  out << r.epoch << '\t' << r.train_loss << '\t' << r.valid_metric << '\t' << r.lr << '\t';
  out.precision(4);
  out << std::fixed << r.seconds;
  return out.str();
}

bool update_schedule(TrainState& state, double metric, bool higher_is_better, double divisor) {
  ++state.epoch;
  bool improved = false;
  if (std::isfinite(metric)) {
    improved = !state.best_metric.has_value() ||
               (higher_is_better ? metric > *state.best_metric : metric < *state.best_metric);
  }
  if (improved) {
    state.best_metric = metric;
    state.best_epoch = state.epoch;
  } else {
    state.lr /= divisor;
  }
  return improved;
}

// ---------------------------------------------------------------------------
// Language model training

TrainState train_lm(LanguageModel& model, const TokenIds& train, const TokenIds& valid,
                    const TrainConfig& config, const TrainHooks& hooks,
                    std::optional<TrainState> resume) {
  config.validate();
  const auto named = model.named_parameters();
  auto params = trainable(named);
  StreamBatches data(train, config.batch_size);
  if (data.length < 2) {
    throw std::invalid_argument("training corpus of " + std::to_string(train.size()) +
                                " tokens is too short for batch size " +
                                std::to_string(config.batch_size));
  }
  if (valid.size() < 2) throw std::invalid_argument("validation corpus needs at least 2 tokens");

  SgdOptimizer optimizer(config.momentum);
  TrainState state;
  state.lr = config.initial_lr;
  if (resume) state = *resume;
  Snapshot best = Snapshot::take(named);

  while (state.epoch < config.max_epochs) {
    const auto start = std::chrono::steady_clock::now();
    const int epoch = state.epoch + 1;
    std::mt19937_64 rng(derive_seed(config.seed, "dropout/" + std::to_string(epoch)));
    cells::CellState hidden = model.initial_state(data.batch);
    double total = 0.0;
    Index count = 0;
    std::size_t batch = 0;
    for (Index begin = 0; begin + 1 < data.length; begin += config.bptt_len, ++batch) {
      const auto window = data.window(begin, config.bptt_len);
      Tensor loss;
      try {
        auto out = model.forward(window.inputs, detached(hidden), Mode::Train, rng);
        loss = ad::softmax_cross_entropy(out.logits, window.targets);
        hidden = detached(out.state);
      } catch (const ad::NonFiniteError& e) {
        ad::Tape::active().clear();
        throw TrainingError("non-finite value at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch) + ": " + e.what());
      }
      if (!std::isfinite(loss.item())) {
        ad::Tape::active().clear();
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch));
      }
      ad::backward(loss);
      StepInfo info = apply_update(params, optimizer, state.lr, config.clip_norm);
      info.epoch = epoch;
      info.batch = batch;
      info.loss = loss.item();
      if (hooks.on_step) hooks.on_step(info);
      total += loss.item() * static_cast<double>(window.targets.size());
      count += static_cast<Index>(window.targets.size());
    }

    const double metric =
        perplexity(model, valid, {config.eval_batch_size, config.bptt_len});
    if (update_schedule(state, metric, false, config.lr_divisor)) best = Snapshot::take(named);
    EpochRecord record{epoch, total / static_cast<double>(count), metric, state.lr,
                       seconds_since(start)};
    state.history.push_back(record);
    if (hooks.on_epoch) hooks.on_epoch(record);
    if (hooks.stop_after && hooks.stop_after(record)) break;
  }
  best.restore(named);
  return state;
}

// ---------------------------------------------------------------------------
// Pair classifier training

std::vector<EncodedPair> encode_pairs(const std::vector<PairExample>& pairs,
                                      const Vocabulary& vocab) {
  std::vector<EncodedPair> out;
  out.reserve(pairs.size());
  auto encode = [&vocab](const std::vector<std::string>& words) {
    TokenIds ids;
    for (const auto& w : words) ids.push_back(vocab.id(w));
    return ids;
  };
  for (const auto& p : pairs) out.push_back({p.label, encode(p.premise), encode(p.hypothesis)});
  return out;
}

PairEvaluation evaluate_pairs(const PairClassifier& model, const std::vector<EncodedPair>& data) {
  PairEvaluation ev;
  std::size_t correct = 0;
  for (const auto& ex : data) {
    const Eigen::Vector3d probs = model.classify_pair(ex.premise, ex.hypothesis);
    Eigen::Index predicted = 0;
    probs.maxCoeff(&predicted);
    const auto gold = static_cast<std::size_t>(ex.label);
    ++ev.confusion[gold][static_cast<std::size_t>(predicted)];
    if (static_cast<std::size_t>(predicted) == gold) ++correct;
  }
  ev.accuracy = data.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(data.size());
  return ev;
}

TrainState train_pair(PairClassifier& model, const std::vector<EncodedPair>& train,
                      const std::vector<EncodedPair>& valid, const TrainConfig& config,
                      const TrainHooks& hooks, std::optional<TrainState> resume) {
  config.validate();
  if (train.empty() || valid.empty()) throw std::invalid_argument("pair datasets must be non-empty");
  const auto named = model.named_parameters();
  auto params = trainable(named);

  SgdOptimizer optimizer(config.momentum);
  TrainState state;
  state.lr = config.initial_lr;
  if (resume) state = *resume;
  Snapshot best = Snapshot::take(named);

  std::vector<std::size_t> order(train.size());
  while (state.epoch < config.max_epochs) {
    const auto start = std::chrono::steady_clock::now();
    const int epoch = state.epoch + 1;
    std::mt19937_64 dropout_rng(derive_seed(config.seed, "dropout/" + std::to_string(epoch)));
    std::mt19937_64 order_rng(derive_seed(config.seed, "order/" + std::to_string(epoch)));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), order_rng);
    double total = 0.0;
    std::size_t batch = 0;
    for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(config.batch_size), ++batch) {
      const std::size_t last =
          std::min(order.size(), first + static_cast<std::size_t>(config.batch_size));
      Tensor loss;
      try {
        std::vector<Tensor> losses;
        for (std::size_t k = first; k < last; ++k) {
          const auto& ex = train[order[k]];
          const Index target[] = {static_cast<Index>(ex.label)};
          losses.push_back(ad::softmax_cross_entropy(
              model.logits(ex.premise, ex.hypothesis, Mode::Train, dropout_rng), target));
        }
        loss = ad::scale(ad::sum(ad::concat(losses)), 1.0 / static_cast<double>(last - first));
      } catch (const ad::NonFiniteError& e) {
        ad::Tape::active().clear();
        throw TrainingError("non-finite value at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch) + ": " + e.what());
      }
      if (!std::isfinite(loss.item())) {
        ad::Tape::active().clear();
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch));
      }
      ad::backward(loss);
      StepInfo info = apply_update(params, optimizer, state.lr, config.clip_norm);
      info.epoch = epoch;
      info.batch = batch;
      info.loss = loss.item();
      if (hooks.on_step) hooks.on_step(info);
      total += loss.item() * static_cast<double>(last - first);
    }

    const double metric = evaluate_pairs(model, valid).accuracy;
    if (update_schedule(state, metric, true, config.lr_divisor)) best = Snapshot::take(named);
    EpochRecord record{epoch, total / static_cast<double>(train.size()), metric, state.lr,
                       seconds_since(start)};
    state.history.push_back(record);
    if (hooks.on_epoch) hooks.on_epoch(record);
    if (hooks.stop_after && hooks.stop_after(record)) break;
  }
  best.restore(named);
  return state;
}

}  // namespace sememe
