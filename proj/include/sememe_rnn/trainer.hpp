// SPDX-License-Identifier: Apache-2.0
//
// Parameter initialization, plain/momentum SGD with global-norm clipping, and
// the epoch loop with plateau learning-rate division and best-epoch selection.

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sememe_rnn/cells.hpp"
#include "sememe_rnn/models.hpp"
#include "sememe_rnn/vocabulary.hpp"

namespace sememe {

/// Variance of the Normal initializer for every trainable non-bias tensor.
inline constexpr double kInitVariance = 0.05;

enum class Preset { Tiny, Desk, Medium, Large, Custom };

std::string_view preset_name(Preset preset);
Preset parse_preset(std::string_view name);

struct TrainConfig {
  double initial_lr = 20.0;
  double lr_divisor = 4.0;
  double clip_norm = 0.25;
  int max_epochs = 40;
  ad::Index batch_size = 20;
  ad::Index bptt_len = 35;
  ad::Index eval_batch_size = 10;
  double dropout = 0.5;
  double momentum = 0.0;
  std::uint64_t seed = 1;
  Preset preset = Preset::Medium;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct ModelDims {
  ad::Index embed = 0;
  ad::Index hidden = 0;
  ad::Index sememe = 0;
};

/// Language-model settings for a preset. `medium` (650) and `large` (1500)
/// are the full-size recipes; `desk` (64) and `tiny` (32) are small-scale
/// variants with fewer epochs.
TrainConfig lm_preset(Preset preset, cells::Base base);
ModelDims preset_dims(Preset preset);

/// Pair-classifier settings: learning rate 0.1 divided by 5 on a plateau,
/// momentum 0.99, input dropout 0.2 (0 for tiny), otherwise as lm_preset.
TrainConfig pair_preset(Preset preset);
/// 300-d embeddings and 2048-d hidden states for medium/large.
ModelDims pair_preset_dims(Preset preset);

/// Independent 64-bit seed for a named purpose ("init", "dropout", ...).
std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose);

/// Fills trainable tensors from Normal(0, kInitVariance) and zeroes biases.
/// Each tensor draws from a stream keyed by its name, so adding or resizing
/// one tensor leaves the others unchanged.
void init_params(const std::vector<NamedTensor>& params, std::uint64_t seed);

double global_grad_norm(std::span<const ad::Tensor> params);

/// Rescales all gradients so their global L2 norm is at most `clip_norm`;
/// returns the scale applied (1 when no clipping happened).
double clip_gradients(std::span<ad::Tensor> params, double clip_norm);

/// p <- p - lr * grad for trainable tensors, then clears gradients.
void sgd_step(std::span<ad::Tensor> params, double lr);

/// SGD with classical momentum (v <- mu v + g; p <- p - lr v). Momentum 0
/// reduces to sgd_step.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(double momentum = 0.0) : momentum_(momentum) {}
  void step(std::span<ad::Tensor> params, double lr);

 private:
  double momentum_;
  std::unordered_map<const void*, ad::Matrix> velocity_;
};

std::vector<ad::Tensor> trainable(const std::vector<NamedTensor>& params);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_metric = 0.0;
  double lr = 0.0;  // after the plateau update
  double seconds = 0.0;
};

/// Tab-separated: epoch, train_loss, valid_metric, lr, seconds.
std::string format_epoch_record(const EpochRecord& record);
inline constexpr std::string_view kEpochLogHeader = "epoch\ttrain_loss\tvalid_metric\tlr\tseconds";

struct TrainState {
  double lr = 0.0;
  std::optional<double> best_metric;
  int best_epoch = 0;
  int epoch = 0;
  std::vector<EpochRecord> history;
};

/// Records `metric` for the finished epoch; divides the learning rate when it
/// is not strictly better than the best so far. Returns whether it improved.
bool update_schedule(TrainState& state, double metric, bool higher_is_better, double divisor);

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StepInfo {
  int epoch = 0;
  std::size_t batch = 0;
  double loss = 0.0;
  double grad_norm = 0.0;       // before clipping
  double clipped_norm = 0.0;    // after clipping
};

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(const StepInfo&)> on_step;
  /// Ends training after the epoch just recorded when it returns true.
  std::function<bool(const EpochRecord&)> stop_after;
};

/// Trains with truncated BPTT over contiguous streams; validation metric is
/// perplexity. On return the model holds the best-validation parameters.
/// A `resume` state continues its epoch count, learning rate and best metric;
/// the model is assumed to hold that state's best parameters.
TrainState train_lm(LanguageModel& model, const TokenIds& train, const TokenIds& valid,
                    const TrainConfig& config, const TrainHooks& hooks = {},
                    std::optional<TrainState> resume = std::nullopt);

struct EncodedPair {
  PairLabel label;
  TokenIds premise;
  TokenIds hypothesis;
};

std::vector<EncodedPair> encode_pairs(const std::vector<PairExample>& pairs,
                                      const Vocabulary& vocab);

struct PairEvaluation {
  double accuracy = 0.0;
  /// confusion[gold][predicted]
  std::array<std::array<std::size_t, 3>, 3> confusion{};
};

PairEvaluation evaluate_pairs(const PairClassifier& model, const std::vector<EncodedPair>& data);

/// Minibatch training of the pair classifier; validation metric is accuracy.
TrainState train_pair(PairClassifier& model, const std::vector<EncodedPair>& train,
                      const std::vector<EncodedPair>& valid, const TrainConfig& config,
                      const TrainHooks& hooks = {},
                      std::optional<TrainState> resume = std::nullopt);

}  // namespace sememe
