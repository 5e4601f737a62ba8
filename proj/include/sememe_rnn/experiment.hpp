// SPDX-License-Identifier: Apache-2.0
//
// Experiment plumbing behind the command-line tool: loading corpora and
// lexicons, applying ablations, training, writing run artifacts, evaluating
// checkpoints and running the two ablation grids.
//
// A training run writes into its output directory:
//   checkpoint.bin  best-validation parameters plus the config snapshot
//   config.json     the same snapshot as readable JSON
//   train.log       `#`-prefixed header lines, then one TSV row per epoch
//   result.tsv      one `train` record (see kTrainRecordHeader)

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sememe_rnn/cells.hpp"
#include "sememe_rnn/lexicon.hpp"
#include "sememe_rnn/models.hpp"
#include "sememe_rnn/trainer.hpp"

namespace sememe {

enum class Task { Lm, Pair };
std::string_view task_name(Task task);
Task parse_task(std::string_view name);

enum class AblationKind { None, Coverage, Meaningless };

struct Ablation {
  AblationKind kind = AblationKind::None;
  double fraction = 1.0;  // kept fraction of annotated words, coverage only

  std::string name() const;  // "none", "coverage:0.5", "meaningless"
};

/// A configuration problem; `field()` names the offending setting.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what);
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct ExperimentSpec {
  Task task = Task::Lm;
  cells::CellVariant variant;
  bool bidirectional = false;
  Pooling pooling = Pooling::Final;
  std::filesystem::path train_path;
  std::filesystem::path valid_path;
  std::filesystem::path test_path;        // optional
  std::filesystem::path lexicon_path;     // required for sememe variants
  std::filesystem::path embeddings_path;  // optional, pair task only
  TrainConfig train;
  ModelDims dims;
  Ablation ablation;
  std::filesystem::path output_dir;

  /// Throws ConfigError for inconsistent settings or unreadable inputs.
  void validate() const;
};

nlohmann::json spec_to_json(const ExperimentSpec& spec);
ExperimentSpec spec_from_json(const nlohmann::json& j);

struct TrainOutcome {
  TrainState state;
  double valid_metric = 0.0;  // best epoch
  double test_metric = 0.0;   // on the test corpus, or the validation corpus without one
  std::size_t annotated_words = 0;
  std::size_t masked_words = 0;
};

/// Trains one model and writes the run artifacts into spec.output_dir.
/// `resume_dir` continues a previous run from its checkpoint. Progress lines go
/// to `progress` when non-null.
TrainOutcome run_train(const ExperimentSpec& spec, std::ostream* progress = nullptr,
                       const std::optional<std::filesystem::path>& resume_dir = std::nullopt);

struct EvalReport {
  Task task = Task::Lm;
  std::string data;
  PerplexityResult lm;
  PairEvaluation pair;
  std::size_t examples = 0;

  double metric() const { return task == Task::Lm ? lm.perplexity : pair.accuracy; }
};

/// Rebuilds the model from a checkpoint (its config snapshot is sufficient)
/// and scores `data_path`. Throws std::runtime_error on a vocabulary
/// fingerprint mismatch or a malformed checkpoint.
EvalReport run_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& data_path);

void print_eval_human(std::ostream& out, const EvalReport& report);
void print_eval_records(std::ostream& out, const EvalReport& report);

// Machine-readable record layouts (tab-separated, first field is the record kind).
inline constexpr std::string_view kTrainRecordHeader =
    "train\ttask\tvariant\tablation\tseed\tepochs\tbest_epoch\tvalid_metric\ttest_metric";
inline constexpr std::string_view kEvalRecordHeader =
    "eval\ttask\tmetric\tvalue\tcount\tdata";
inline constexpr std::string_view kConfusionRecordHeader =
    "confusion\tgold\tpredicted\tcount";
inline constexpr std::string_view kCellRecordHeader =
    "cell\tarm\tseed\tvalid_metric\ttest_metric";

std::string format_train_record(const ExperimentSpec& spec, const TrainOutcome& outcome);

struct AblationTable {
  std::string title;
  std::vector<std::string> arms;           // row labels
  std::vector<std::uint64_t> seeds;        // column labels
  std::vector<std::vector<double>> test;   // test[arm][seed]
  std::vector<std::vector<double>> valid;  // valid[arm][seed]

  double mean(std::size_t arm) const;
};

/// Header `arm`, `seed=<s>` per seed, `mean`; then one row per arm.
std::string format_table(const AblationTable& table);

struct AblationOptions {
  std::vector<std::uint64_t> seeds = {1};
  int jobs = 1;  // concurrent training runs
  std::ostream* progress = nullptr;
};

/// One run per (fraction, seed); every run keeps `base.variant`, so the
/// fraction-0 row is the sememe variant with all annotations removed. Runs
/// write into <output_dir>/coverage-<fraction>/seed-<seed>.
AblationTable run_coverage_ablation(const ExperimentSpec& base,
                                    const std::vector<double>& fractions,
                                    const AblationOptions& options);

/// Rows `none` (vanilla cell of the same base), `labels` (meaningless
/// substitution) and `sememes` (true lexicon).
AblationTable run_substitution_ablation(const ExperimentSpec& base,
                                        const AblationOptions& options);

}  // namespace sememe
