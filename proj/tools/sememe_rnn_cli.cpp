// SPDX-License-Identifier: Apache-2.0
//
// sememe-rnn: train, evaluate and ablate sememe-augmented recurrent models.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sememe_rnn/experiment.hpp"
#include "sememe_rnn/gradient_suite.hpp"
#include "sememe_rnn/synthdata.hpp"

namespace {

using namespace sememe;
namespace fs = std::filesystem;

constexpr const char* kRecordsHelp = R"(
Machine-readable records (stdout, tab-separated, first field names the record):
  train      task variant ablation seed epochs best_epoch valid_metric test_metric
  eval       task metric value count data
  confusion  gold predicted count                       (pair task, 9 lines)
  cell       arm seed valid_metric test_metric          (one per ablation run)
  gradcheck  variant tensor max_relative_error
Ablation tables follow the line `table <kind> <variant>`:
  arm  seed=<s>...  mean                                (test metric per seed)
Per-epoch training log (train.log in the output directory):
  epoch train_loss valid_metric lr seconds
Metrics are perplexity for the lm task and accuracy for the pair task.
)";

struct SpecArgs {
  std::string task = "lm";
  std::string variant = "lstm";
  bool bidirectional = false;
  std::string pooling = "final";
  std::string train, valid, test, lexicon, embeddings;
  std::string preset = "medium";
  std::optional<double> lr, lr_divisor, clip, dropout, momentum;
  std::optional<int> epochs;
  std::optional<ad::Index> batch_size, bptt, eval_batch_size, embed_dim, hidden_dim, sememe_dim;
  std::uint64_t seed = 1;
  std::string ablation = "none";
  double coverage = 1.0;
  std::string out;
};

void add_spec_options(CLI::App* app, SpecArgs& a, bool with_ablation) {
  app->add_option("--config", "key = value file supplying any flag; the command line wins");
  app->add_option("--task", a.task, "lm or pair")->check(CLI::IsMember({"lm", "pair"}))->capture_default_str();
  app->add_option("--variant", a.variant, "lstm, gru, or <base>+concat|gate|cell")->capture_default_str();
  app->add_flag("--bidirectional", a.bidirectional, "bidirectional encoder (pair task)");
  app->add_option("--pooling", a.pooling, "sentence embedding: final or max")
      ->check(CLI::IsMember({"final", "max"}))->capture_default_str();
  app->add_option("--train", a.train, "training corpus or pair TSV");
  app->add_option("--valid", a.valid, "validation corpus or pair TSV");
  app->add_option("--test", a.test, "test corpus or pair TSV (defaults to --valid)");
  app->add_option("--lexicon", a.lexicon, "sememe lexicon: word<TAB>sememe,sememe,...");
  app->add_option("--embeddings", a.embeddings, "frozen pretrained word vectors (pair task)");
  app->add_option("--preset", a.preset, "tiny, desk, medium, large or custom")->capture_default_str();
  app->add_option("--lr", a.lr, "initial learning rate");
  app->add_option("--lr-divisor", a.lr_divisor, "learning-rate divisor on a validation plateau");
  app->add_option("--clip", a.clip, "global gradient-norm clip");
  app->add_option("--dropout", a.dropout, "dropout rate");
  app->add_option("--momentum", a.momentum, "SGD momentum (0 disables)");
  app->add_option("--epochs", a.epochs, "maximum epochs");
  app->add_option("--batch-size", a.batch_size, "training batch size");
  app->add_option("--bptt", a.bptt, "truncated BPTT window (lm)");
  app->add_option("--eval-batch-size", a.eval_batch_size, "evaluation streams (lm)");
  app->add_option("--embed-dim", a.embed_dim, "word embedding size");
  app->add_option("--hidden-dim", a.hidden_dim, "hidden state size");
  app->add_option("--sememe-dim", a.sememe_dim, "sememe embedding size");
  app->add_option("--seed", a.seed, "root random seed")->capture_default_str();
  app->add_option("--out", a.out, "output directory")->required();
  if (with_ablation) {
    app->add_option("--ablation", a.ablation, "none, coverage or meaningless")
        ->check(CLI::IsMember({"none", "coverage", "meaningless"}))->capture_default_str();
    app->add_option("--coverage", a.coverage, "kept fraction of annotated words")
        ->capture_default_str();
  }
}

ExperimentSpec build_spec(const SpecArgs& a) {
  ExperimentSpec s;
  s.task = parse_task(a.task);
  s.variant = cells::CellVariant::parse(a.variant);
  s.bidirectional = a.bidirectional;
  s.pooling = a.pooling == "max" ? Pooling::Max : Pooling::Final;
  s.train_path = a.train;
  s.valid_path = a.valid;
  s.test_path = a.test;
  s.lexicon_path = a.lexicon;
  s.embeddings_path = a.embeddings;
  s.output_dir = a.out;

  const Preset preset = parse_preset(a.preset);
  s.train = s.task == Task::Lm ? lm_preset(preset, s.variant.base) : pair_preset(preset);
  s.dims = s.task == Task::Lm ? preset_dims(preset) : pair_preset_dims(preset);
  TrainConfig& t = s.train;
  if (a.lr) t.initial_lr = *a.lr;
  if (a.lr_divisor) t.lr_divisor = *a.lr_divisor;
  if (a.clip) t.clip_norm = *a.clip;
  if (a.dropout) t.dropout = *a.dropout;
  if (a.momentum) t.momentum = *a.momentum;
  if (a.epochs) t.max_epochs = *a.epochs;
  if (a.batch_size) t.batch_size = *a.batch_size;
  if (a.bptt) t.bptt_len = *a.bptt;
  if (a.eval_batch_size) t.eval_batch_size = *a.eval_batch_size;
  t.seed = a.seed;
  if (a.embed_dim) s.dims.embed = *a.embed_dim;
  if (a.hidden_dim) s.dims.hidden = *a.hidden_dim;
  if (a.sememe_dim) s.dims.sememe = *a.sememe_dim;
  if (!s.variant.uses_knowledge() && !a.sememe_dim) s.dims.sememe = 0;

  if (a.ablation == "coverage") s.ablation = {AblationKind::Coverage, a.coverage};
  if (a.ablation == "meaningless") s.ablation = {AblationKind::Meaningless, 1.0};
  return s;
}

// CLI11 only reads config files for the top-level app, so the subcommand's
// --config file is spliced into argv here. Keys already on the command line
// are skipped.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string path;
  std::size_t at = args.size();
  for (std::size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] == "--config") {
      path = args[i + 1];
      at = i;
    }
  }
  if (path.empty()) return args;
  if (!fs::exists(path)) throw std::runtime_error("cannot read " + path);

  std::vector<std::string> injected;
  for (const auto& item : CLI::ConfigINI().from_file(path)) {
    if (item.name == "++" || item.name == "--" || item.inputs.empty()) continue;
    const std::string flag = "--" + item.name;
    if (std::find(args.begin(), args.end(), flag) != args.end()) continue;
    if (flag == "--bidirectional") {
      if (item.inputs.front() == "true" || item.inputs.front() == "1") injected.push_back(flag);
      continue;
    }
    injected.push_back(flag);
    injected.insert(injected.end(), item.inputs.begin(), item.inputs.end());
  }
  args.erase(args.begin() + static_cast<std::ptrdiff_t>(at),
             args.begin() + static_cast<std::ptrdiff_t>(at) + 2);
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(at), injected.begin(), injected.end());
  return args;
}

void print_table(const std::string& kind, const ExperimentSpec& spec, const AblationTable& t) {
  std::cout << "table\t" << kind << '\t' << spec.variant.name() << '\n' << format_table(t);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sememe-augmented LSTM/GRU language models and sentence-pair classifiers"};
  app.footer(kRecordsHelp);
  app.require_subcommand(1);

  SpecArgs train_args;
  std::string resume;
  auto* train = app.add_subcommand("train", "train one model and write its run directory");
  add_spec_options(train, train_args, true);
  train->add_option("--resume", resume, "continue from the checkpoint in this run directory");

  std::string checkpoint, data;
  auto* eval = app.add_subcommand("eval", "score a corpus or pair file with a saved checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint.bin from a train run")->required();
  eval->add_option("--data", data, "corpus (lm) or pair TSV (pair)")->required();

  SpecArgs cov_args;
  std::vector<double> fractions{0.0, 0.5, 1.0};
  std::vector<std::uint64_t> cov_seeds{1};
  int cov_jobs = 1;
  auto* cov = app.add_subcommand("ablate-coverage", "retrain at several annotation coverages");
  add_spec_options(cov, cov_args, false);
  cov->add_option("--fractions", fractions, "kept fractions of annotated words")->delimiter(',');
  cov->add_option("--seeds", cov_seeds, "one run per seed and fraction")->delimiter(',');
  cov->add_option("--jobs", cov_jobs, "concurrent runs")->capture_default_str();

  SpecArgs sub_args;
  std::vector<std::uint64_t> sub_seeds{1};
  int sub_jobs = 1;
  auto* sub = app.add_subcommand("ablate-substitute",
                                 "compare no knowledge, meaningless labels and true sememes");
  add_spec_options(sub, sub_args, false);
  sub->add_option("--seeds", sub_seeds, "one run per seed and arm")->delimiter(',');
  sub->add_option("--jobs", sub_jobs, "concurrent runs")->capture_default_str();

  cells::GradientSuiteOptions grad;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every cell variant");
  gradcheck->add_option("--dim", grad.dim, "input, hidden and sememe size")->capture_default_str();
  gradcheck->add_option("--steps", grad.steps, "sequence length")->capture_default_str();
  gradcheck->add_option("--eps", grad.eps, "central-difference step")->capture_default_str();
  gradcheck->add_option("--seed", grad.seed, "random seed")->capture_default_str();
  double tolerance = 1e-5;
  gradcheck->add_option("--tolerance", tolerance, "exit nonzero above this error")
      ->capture_default_str();

  std::string synth_out;
  std::uint64_t synth_seed = 1;
  synth::SynthSpec synth_spec = synth::default_spec(1);
  int successors = 2;
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic class-chain corpus and lexicon");
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--seed", synth_seed, "random seed")->capture_default_str();
  synth_cmd->add_option("--classes", synth_spec.n_classes, "word classes")->capture_default_str();
  synth_cmd->add_option("--words-per-class", synth_spec.words_per_class)->capture_default_str();
  synth_cmd->add_option("--sememes-per-class", synth_spec.n_sememes_per_class)->capture_default_str();
  synth_cmd->add_option("--successors", successors, "classes reachable from each class")
      ->capture_default_str();
  synth_cmd->add_option("--sentence-length", synth_spec.sentence_length)->capture_default_str();
  synth_cmd->add_option("--train-tokens", synth_spec.train_tokens)->capture_default_str();
  synth_cmd->add_option("--valid-tokens", synth_spec.valid_tokens)->capture_default_str();
  synth_cmd->add_option("--test-tokens", synth_spec.test_tokens)->capture_default_str();

  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: --config: " << e.what() << '\n';
    return 2;
  }
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (train->parsed()) {
      const ExperimentSpec spec = build_spec(train_args);
      std::optional<fs::path> resume_dir;
      if (!resume.empty()) resume_dir = fs::path(resume);
      const TrainOutcome outcome = run_train(spec, &std::cerr, resume_dir);
      if (spec.ablation.kind == AblationKind::Coverage) {
        std::cerr << "masked " << outcome.masked_words << " of " << outcome.annotated_words
                  << " annotated words\n";
      }
      std::cout << kTrainRecordHeader << '\n' << format_train_record(spec, outcome) << '\n';
    } else if (eval->parsed()) {
      const EvalReport report = run_eval(checkpoint, data);
      print_eval_human(std::cerr, report);
      print_eval_records(std::cout, report);
    } else if (cov->parsed()) {
      const ExperimentSpec spec = build_spec(cov_args);
      const AblationTable table =
          run_coverage_ablation(spec, fractions, {cov_seeds, cov_jobs, &std::cout});
      print_table("coverage", spec, table);
    } else if (sub->parsed()) {
      const ExperimentSpec spec = build_spec(sub_args);
      const AblationTable table = run_substitution_ablation(spec, {sub_seeds, sub_jobs, &std::cout});
      print_table("substitution", spec, table);
    } else if (gradcheck->parsed()) {
      double worst = 0.0;
      for (const auto& row : cells::gradient_suite_all(grad)) {
        std::cout << "gradcheck\t" << row.variant.name() << '\t' << row.tensor << '\t'
                  << row.max_relative_error << '\n';
        worst = std::max(worst, row.max_relative_error);
      }
      std::cerr << "max relative error " << worst << (worst < tolerance ? " (ok)\n" : " (FAILED)\n");
      return worst < tolerance ? 0 : 1;
    } else if (synth_cmd->parsed()) {
      synth_spec.transition = synth::peaked_transition(synth_spec.n_classes, successors, synth_seed ^ 0x5eedULL);
      synth_spec.seed = synth_seed;
      synth::write_corpus(synth_out, synth::generate(synth_spec));
      std::cerr << "perplexity lower bound " << synth::perplexity_lower_bound(synth_spec) << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: --" << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
