// SPDX-License-Identifier: Apache-2.0

#include "sememe_rnn/experiment.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "sememe_rnn/checkpoint.hpp"
#include "sememe_rnn/vocabulary.hpp"

namespace sememe {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view task_name(Task task) { return task == Task::Lm ? "lm" : "pair"; }

Task parse_task(std::string_view name) {
  if (name == "lm") return Task::Lm;
  if (name == "pair") return Task::Pair;
  throw std::invalid_argument("unknown task '" + std::string(name) + "' (expected lm or pair)");
}

std::string Ablation::name() const {
  switch (kind) {
    case AblationKind::None:
      return "none";
    case AblationKind::Meaningless:
      return "meaningless";
    case AblationKind::Coverage: {
      std::ostringstream out;
      out << "coverage:" << fraction;
      return out.str();
    }
  }
  return "none";
}

ConfigError::ConfigError(std::string field, const std::string& what)
    : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

namespace {

void require_readable(const fs::path& path, const char* field) {
  if (path.empty()) throw ConfigError(field, "path is required");
  std::ifstream in(path);
  if (!in) throw ConfigError(field, "cannot read '" + path.string() + "'");
}

std::string pooling_name(Pooling p) { return p == Pooling::Final ? "final" : "max"; }

Pooling parse_pooling(const std::string& name) {
  if (name == "final") return Pooling::Final;
  if (name == "max") return Pooling::Max;
  throw std::invalid_argument("unknown pooling '" + name + "'");
}

}  // namespace

void ExperimentSpec::validate() const {
  if (task == Task::Lm && bidirectional) {
    throw ConfigError("bidirectional", "language models are unidirectional");
  }
  if (ablation.kind == AblationKind::Coverage &&
      !(ablation.fraction >= 0.0 && ablation.fraction <= 1.0)) {
    throw ConfigError("coverage", "fraction must be in [0, 1]");
  }
  if (dims.embed <= 0) throw ConfigError("embed-dim", "must be positive");
  if (dims.hidden <= 0) throw ConfigError("hidden-dim", "must be positive");
  if (variant.uses_knowledge() && dims.sememe <= 0) {
    throw ConfigError("sememe-dim", "must be positive for " + variant.name());
  }
  if (variant == cells::CellVariant{cells::Base::Gru, cells::Method::Gate} &&
      dims.sememe != dims.hidden) {
    throw ConfigError("sememe-dim", "gru+gate needs sememe-dim equal to hidden-dim");
  }
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("train", e.what());
  }
  if (output_dir.empty()) throw ConfigError("out", "output directory is required");
  require_readable(train_path, "train");
  require_readable(valid_path, "valid");
  if (!test_path.empty()) require_readable(test_path, "test");
  if (variant.uses_knowledge() || ablation.kind != AblationKind::None) {
    require_readable(lexicon_path, "lexicon");
  }
  if (!embeddings_path.empty()) {
    if (task != Task::Pair) throw ConfigError("embeddings", "only used by the pair task");
    require_readable(embeddings_path, "embeddings");
  }
}

json spec_to_json(const ExperimentSpec& s) {
  const TrainConfig& t = s.train;
  return json{
      {"task", task_name(s.task)},
      {"variant", s.variant.name()},
      {"bidirectional", s.bidirectional},
      {"pooling", pooling_name(s.pooling)},
      {"train_path", s.train_path.string()},
      {"valid_path", s.valid_path.string()},
      {"test_path", s.test_path.string()},
      {"lexicon_path", s.lexicon_path.string()},
      {"embeddings_path", s.embeddings_path.string()},
      {"output_dir", s.output_dir.string()},
      {"dims", {{"embed", s.dims.embed}, {"hidden", s.dims.hidden}, {"sememe", s.dims.sememe}}},
      {"ablation",
       {{"kind", s.ablation.kind == AblationKind::None       ? "none"
                 : s.ablation.kind == AblationKind::Coverage ? "coverage"
                                                             : "meaningless"},
        {"fraction", s.ablation.fraction}}},
      {"train",
       {{"initial_lr", t.initial_lr},
        {"lr_divisor", t.lr_divisor},
        {"clip_norm", t.clip_norm},
        {"max_epochs", t.max_epochs},
        {"batch_size", t.batch_size},
        {"bptt_len", t.bptt_len},
        {"eval_batch_size", t.eval_batch_size},
        {"dropout", t.dropout},
        {"momentum", t.momentum},
        {"seed", t.seed},
        {"preset", preset_name(t.preset)}}},
  };
}

ExperimentSpec spec_from_json(const json& j) {
  ExperimentSpec s;
  s.task = parse_task(j.at("task").get<std::string>());
  s.variant = cells::CellVariant::parse(j.at("variant").get<std::string>());
  s.bidirectional = j.at("bidirectional").get<bool>();
  s.pooling = parse_pooling(j.at("pooling").get<std::string>());
  s.train_path = j.at("train_path").get<std::string>();
  s.valid_path = j.at("valid_path").get<std::string>();
  s.test_path = j.at("test_path").get<std::string>();
  s.lexicon_path = j.at("lexicon_path").get<std::string>();
  s.embeddings_path = j.at("embeddings_path").get<std::string>();
  s.output_dir = j.at("output_dir").get<std::string>();
  const json& d = j.at("dims");
  s.dims = {d.at("embed").get<ad::Index>(), d.at("hidden").get<ad::Index>(),
            d.at("sememe").get<ad::Index>()};
  const json& a = j.at("ablation");
  const auto kind = a.at("kind").get<std::string>();
  s.ablation.kind = kind == "coverage"      ? AblationKind::Coverage
                    : kind == "meaningless" ? AblationKind::Meaningless
                                            : AblationKind::None;
  s.ablation.fraction = a.at("fraction").get<double>();
  const json& t = j.at("train");
  s.train.initial_lr = t.at("initial_lr").get<double>();
  s.train.lr_divisor = t.at("lr_divisor").get<double>();
  s.train.clip_norm = t.at("clip_norm").get<double>();
  s.train.max_epochs = t.at("max_epochs").get<int>();
  s.train.batch_size = t.at("batch_size").get<ad::Index>();
  s.train.bptt_len = t.at("bptt_len").get<ad::Index>();
  s.train.eval_batch_size = t.at("eval_batch_size").get<ad::Index>();
  s.train.dropout = t.at("dropout").get<double>();
  s.train.momentum = t.at("momentum").get<double>();
  s.train.seed = t.at("seed").get<std::uint64_t>();
  s.train.preset = parse_preset(t.at("preset").get<std::string>());
  return s;
}

namespace {

json state_to_json(const TrainState& st) {
  json history = json::array();
  for (const auto& r : st.history) {
    history.push_back({{"epoch", r.epoch},
                       {"train_loss", r.train_loss},
                       {"valid_metric", r.valid_metric},
                       {"lr", r.lr},
                       {"seconds", r.seconds}});
  }
  json j{{"lr", st.lr}, {"best_epoch", st.best_epoch}, {"epoch", st.epoch}, {"history", history}};
  j["best_metric"] = st.best_metric ? json(*st.best_metric) : json(nullptr);
  return j;
}

TrainState state_from_json(const json& j) {
  TrainState st;
  st.lr = j.at("lr").get<double>();
  st.best_epoch = j.at("best_epoch").get<int>();
  st.epoch = j.at("epoch").get<int>();
  if (!j.at("best_metric").is_null()) st.best_metric = j.at("best_metric").get<double>();
  for (const auto& r : j.at("history")) {
    st.history.push_back({r.at("epoch").get<int>(), r.at("train_loss").get<double>(),
                          r.at("valid_metric").get<double>(), r.at("lr").get<double>(),
                          r.at("seconds").get<double>()});
  }
  return st;
}

struct Knowledge {
  SememeLexicon lexicon;
  std::size_t annotated = 0;
  std::size_t masked = 0;
};

Knowledge prepare_knowledge(const ExperimentSpec& spec) {
  Knowledge k;
  if (spec.lexicon_path.empty() || !spec.variant.uses_knowledge()) return k;
  k.lexicon = load_lexicon(spec.lexicon_path);
  k.annotated = k.lexicon.annotated_words();
  switch (spec.ablation.kind) {
    case AblationKind::None:
      break;
    case AblationKind::Coverage:
      k.lexicon = mask_coverage(k.lexicon, spec.ablation.fraction,
                                derive_seed(spec.train.seed, "mask"));
      k.masked = k.annotated - k.lexicon.annotated_words();
      break;
    case AblationKind::Meaningless:
      k.lexicon = substitute_meaningless(k.lexicon, derive_seed(spec.train.seed, "labels"));
      break;
  }
  return k;
}

ad::Matrix averaging_for(const cells::CellVariant& variant, const Vocabulary& vocab,
                         const SememeLexicon& lex) {
  if (!variant.uses_knowledge()) return ad::Matrix::Zero(vocab.size(), 0);
  return sememe_averaging_matrix(vocab.words(), lex);
}

LmConfig lm_config(const ExperimentSpec& spec, ad::Index vocab) {
  return {spec.variant, vocab, spec.dims.embed, spec.dims.sememe, spec.dims.hidden,
          spec.train.dropout};
}

PairConfig pair_config(const ExperimentSpec& spec, ad::Index vocab) {
  return {spec.variant,     spec.bidirectional, vocab,
          spec.dims.embed,  spec.dims.sememe,   spec.dims.hidden,
          spec.train.dropout, spec.pooling};
}

Vocabulary pair_vocabulary(const std::vector<PairExample>& pairs) {
  Vocabulary vocab;
  for (const auto& p : pairs) {
    for (const auto& w : p.premise) vocab.add(w);
    for (const auto& w : p.hypothesis) vocab.add(w);
  }
  return vocab;
}

/// Overwrites rows of words found in the pretrained table; those vectors stay
/// fixed when the table is frozen.
void apply_pretrained(EmbeddingLayer& embedding, const Vocabulary& vocab,
                      const EmbeddingTable& table) {
  if (table.dim() != embedding.words.cols()) {
    throw ConfigError("embeddings", "vectors have dimension " + std::to_string(table.dim()) +
                                        ", expected " + std::to_string(embedding.words.cols()));
  }
  ad::Matrix& m = embedding.words.mutable_value();
  for (ad::Index id = 0; id < vocab.size(); ++id) {
    if (const ad::Index* row = table.find(vocab.word(id))) m.row(id) = table.matrix.row(*row);
  }
  embedding.words.set_requires_grad(table.trainable);
}

json run_config(const ExperimentSpec& spec, const Vocabulary& vocab, ad::Index sememes,
                const Knowledge& k, const TrainState& state) {
  return json{{"format", "sememe-rnn-run"},
              {"spec", spec_to_json(spec)},
              {"vocab", vocab.words()},
              {"vocab_fingerprint", vocab.fingerprint()},
              {"sememe_count", sememes},
              {"annotated_words", k.annotated},
              {"masked_words", k.masked},
              {"state", state_to_json(state)}};
}

class RunLog {
 public:
  RunLog(const fs::path& path, bool append) : out_(path, append ? std::ios::app : std::ios::trunc) {
    if (!out_) throw ConfigError("out", "cannot write '" + path.string() + "'");
  }
  void line(std::string_view text) { out_ << text << '\n' << std::flush; }

 private:
  std::ofstream out_;
};

template <typename Model>
void resume_model(const fs::path& dir, const Vocabulary& vocab, Model& model,
                  std::optional<TrainState>& state) {
  const Checkpoint ckpt = load_checkpoint(dir / "checkpoint.bin");
  if (ckpt.config.at("vocab_fingerprint").get<std::uint64_t>() != vocab.fingerprint()) {
    throw std::runtime_error("resume: checkpoint vocabulary differs from the training corpus");
  }
  restore_tensors(ckpt, model.named_parameters());
  state = state_from_json(ckpt.config.at("state"));
}

}  // namespace

TrainOutcome run_train(const ExperimentSpec& spec, std::ostream* progress,
                       const std::optional<fs::path>& resume_dir) {
  spec.validate();
  fs::create_directories(spec.output_dir);
  const Knowledge knowledge = prepare_knowledge(spec);

  RunLog log(spec.output_dir / "train.log", resume_dir && *resume_dir == spec.output_dir);
  if (!resume_dir) {
    std::ostringstream head;
    head << "# task=" << task_name(spec.task) << " variant=" << spec.variant.name()
         << " ablation=" << spec.ablation.name() << " seed=" << spec.train.seed;
    log.line(head.str());
    log.line("# annotated_words=" + std::to_string(knowledge.annotated) +
             " masked_words=" + std::to_string(knowledge.masked));
    log.line(kEpochLogHeader);
  }

  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r) {
    log.line(format_epoch_record(r));
    if (progress) *progress << format_epoch_record(r) << '\n' << std::flush;
  };

  TrainOutcome outcome;
  outcome.annotated_words = knowledge.annotated;
  outcome.masked_words = knowledge.masked;
  std::optional<TrainState> resume;
  json config;

  auto finish = [&](const std::vector<NamedTensor>& named, const Vocabulary& vocab,
                    ad::Index sememes) {
    config = run_config(spec, vocab, sememes, knowledge, outcome.state);
    save_checkpoint(spec.output_dir / "checkpoint.bin", config, named);
    std::ofstream(spec.output_dir / "config.json") << config.dump(2) << '\n';
    outcome.valid_metric = outcome.state.best_metric.value_or(std::nan(""));
  };

  if (spec.task == Task::Lm) {
    const auto train_lines = read_tokenized_lines(spec.train_path);
    const Vocabulary vocab = Vocabulary::build(train_lines);
    const TokenIds train = encode_corpus(train_lines, vocab);
    const TokenIds valid = encode_corpus(read_tokenized_lines(spec.valid_path), vocab);
    const TokenIds test =
        spec.test_path.empty() ? valid : encode_corpus(read_tokenized_lines(spec.test_path), vocab);

    ad::Matrix averaging = averaging_for(spec.variant, vocab, knowledge.lexicon);
    const ad::Index sememes = averaging.cols();
    LanguageModel model(lm_config(spec, vocab.size()), std::move(averaging));
    init_params(model.named_parameters(), derive_seed(spec.train.seed, "init"));
    if (resume_dir) resume_model(*resume_dir, vocab, model, resume);

    outcome.state = train_lm(model, train, valid, spec.train, hooks, resume);
    finish(model.named_parameters(), vocab, sememes);
    outcome.test_metric =
        perplexity(model, test, {spec.train.eval_batch_size, spec.train.bptt_len});
  } else {
    const auto train_pairs = read_pairs(spec.train_path);
    const Vocabulary vocab = pair_vocabulary(train_pairs);
    const auto train = encode_pairs(train_pairs, vocab);
    const auto valid = encode_pairs(read_pairs(spec.valid_path), vocab);
    const auto test = spec.test_path.empty() ? valid : encode_pairs(read_pairs(spec.test_path), vocab);

    ad::Matrix averaging = averaging_for(spec.variant, vocab, knowledge.lexicon);
    const ad::Index sememes = averaging.cols();
    PairClassifier model(pair_config(spec, vocab.size()), std::move(averaging));
    init_params(model.named_parameters(), derive_seed(spec.train.seed, "init"));
    if (!spec.embeddings_path.empty()) {
      apply_pretrained(model.embedding, vocab,
                       load_word_embeddings(spec.embeddings_path, spec.dims.embed));
    }
    if (resume_dir) resume_model(*resume_dir, vocab, model, resume);

    outcome.state = train_pair(model, train, valid, spec.train, hooks, resume);
    finish(model.named_parameters(), vocab, sememes);
    outcome.test_metric = evaluate_pairs(model, test).accuracy;
  }

  std::ofstream result(spec.output_dir / "result.tsv");
  result << kTrainRecordHeader << '\n' << format_train_record(spec, outcome) << '\n';
  return outcome;
}

std::string format_train_record(const ExperimentSpec& spec, const TrainOutcome& o) {
  std::ostringstream out;
  out.precision(17);
  out << "train\t" << task_name(spec.task) << '\t' << spec.variant.name() << '\t'
      << spec.ablation.name() << '\t' << spec.train.seed << '\t' << o.state.epoch << '\t'
      << o.state.best_epoch << '\t' << o.valid_metric << '\t' << o.test_metric;
  return out.str();
}

// ---------------------------------------------------------------------------
// Evaluation

EvalReport run_eval(const fs::path& checkpoint, const fs::path& data_path) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const json& config = ckpt.config;
  if (config.value("format", "") != "sememe-rnn-run") {
    throw std::runtime_error(checkpoint.string() + ": not a training-run checkpoint");
  }
  const ExperimentSpec spec = spec_from_json(config.at("spec"));
  const Vocabulary vocab(config.at("vocab").get<std::vector<std::string>>());
  if (vocab.fingerprint() != config.at("vocab_fingerprint").get<std::uint64_t>()) {
    throw std::runtime_error(checkpoint.string() + ": vocabulary fingerprint mismatch");
  }
  const auto sememes = config.at("sememe_count").get<ad::Index>();
  ad::Matrix averaging = ad::Matrix::Zero(vocab.size(), sememes);

  EvalReport report;
  report.task = spec.task;
  report.data = data_path.string();
  if (spec.task == Task::Lm) {
    LanguageModel model(lm_config(spec, vocab.size()), std::move(averaging));
    restore_tensors(ckpt, model.named_parameters());
    const TokenIds data = encode_corpus(read_tokenized_lines(data_path), vocab);
    report.lm = evaluate_perplexity(model, data, {spec.train.eval_batch_size, spec.train.bptt_len});
    report.examples = static_cast<std::size_t>(report.lm.tokens);
  } else {
    PairClassifier model(pair_config(spec, vocab.size()), std::move(averaging));
    restore_tensors(ckpt, model.named_parameters());
    const auto data = encode_pairs(read_pairs(data_path), vocab);
    report.pair = evaluate_pairs(model, data);
    report.examples = data.size();
  }
  return report;
}

void print_eval_human(std::ostream& out, const EvalReport& r) {
  if (r.task == Task::Lm) {
    out << "perplexity " << std::fixed << std::setprecision(4) << r.lm.perplexity << " ("
        << r.lm.cross_entropy << " nats/token over " << r.lm.tokens << " tokens) on " << r.data
        << '\n';
    out.unsetf(std::ios::fixed);
    return;
  }
  out << "accuracy " << std::fixed << std::setprecision(4) << r.pair.accuracy << " over "
      << r.examples << " pairs on " << r.data << '\n';
  out.unsetf(std::ios::fixed);
  out << "confusion (rows gold, columns predicted):\n" << std::setw(15) << "";
  for (auto name : kPairLabelNames) out << std::setw(15) << name;
  out << '\n';
  for (std::size_t g = 0; g < 3; ++g) {
    out << std::setw(15) << kPairLabelNames[g];
    for (std::size_t p = 0; p < 3; ++p) out << std::setw(15) << r.pair.confusion[g][p];
    out << '\n';
  }
}

void print_eval_records(std::ostream& out, const EvalReport& r) {
  std::ostringstream line;
  line.precision(17);
  if (r.task == Task::Lm) {
    line << "eval\tlm\tperplexity\t" << r.lm.perplexity << '\t' << r.lm.tokens << '\t' << r.data;
    out << line.str() << '\n';
    return;
  }
  line << "eval\tpair\taccuracy\t" << r.pair.accuracy << '\t' << r.examples << '\t' << r.data;
  out << line.str() << '\n';
  for (std::size_t g = 0; g < 3; ++g) {
    for (std::size_t p = 0; p < 3; ++p) {
      out << "confusion\t" << kPairLabelNames[g] << '\t' << kPairLabelNames[p] << '\t'
          << r.pair.confusion[g][p] << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Ablations

double AblationTable::mean(std::size_t arm) const {
  const auto& row = test.at(arm);
  if (row.empty()) return std::nan("");
  double total = 0.0;
  for (double v : row) total += v;
  return total / static_cast<double>(row.size());
}

std::string format_table(const AblationTable& t) {
  std::ostringstream out;
  out.precision(10);
  out << "arm";
  for (auto s : t.seeds) out << "\tseed=" << s;
  out << "\tmean\n";
  for (std::size_t a = 0; a < t.arms.size(); ++a) {
    out << t.arms[a];
    for (double v : t.test[a]) out << '\t' << v;
    out << '\t' << t.mean(a) << '\n';
  }
  return out.str();
}

namespace {

struct GridJob {
  std::size_t arm;
  std::size_t seed;
  ExperimentSpec spec;
};

void run_grid(AblationTable& table, std::vector<GridJob> jobs, const AblationOptions& options) {
  table.test.assign(table.arms.size(), std::vector<double>(table.seeds.size(), std::nan("")));
  table.valid = table.test;

  std::mutex mutex;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const GridJob& job = jobs[i];
      try {
        const TrainOutcome o = run_train(job.spec);
        std::lock_guard lock(mutex);
        table.test[job.arm][job.seed] = o.test_metric;
        table.valid[job.arm][job.seed] = o.valid_metric;
        if (options.progress) {
          *options.progress << std::setprecision(17) << "cell\t" << table.arms[job.arm] << '\t'
                            << table.seeds[job.seed] << '\t' << o.valid_metric << '\t'
                            << o.test_metric << '\n'
                            << std::flush;
        }
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!failure) failure = std::current_exception();
        next = jobs.size();
      }
    }
  };

  const int threads = std::max(1, std::min<int>(options.jobs, static_cast<int>(jobs.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
}

std::string fraction_label(double f) {
  std::ostringstream out;
  out << f;
  return out.str();
}

}  // namespace

AblationTable run_coverage_ablation(const ExperimentSpec& base,
                                    const std::vector<double>& fractions,
                                    const AblationOptions& options) {
  if (!base.variant.uses_knowledge()) {
    throw ConfigError("variant", "coverage ablation needs a sememe variant");
  }
  if (fractions.empty()) throw ConfigError("fractions", "at least one fraction is required");
  if (options.seeds.empty()) throw ConfigError("seeds", "at least one seed is required");

  AblationTable table;
  table.title = "coverage\t" + base.variant.name();
  table.seeds = options.seeds;
  std::vector<GridJob> jobs;
  for (std::size_t a = 0; a < fractions.size(); ++a) {
    table.arms.push_back(fraction_label(fractions[a]));
    for (std::size_t s = 0; s < options.seeds.size(); ++s) {
      ExperimentSpec spec = base;
      spec.ablation = {AblationKind::Coverage, fractions[a]};
      spec.train.seed = options.seeds[s];
      spec.output_dir = base.output_dir / ("coverage-" + table.arms[a]) /
                        ("seed-" + std::to_string(options.seeds[s]));
      spec.validate();
      jobs.push_back({a, s, std::move(spec)});
    }
  }
  run_grid(table, std::move(jobs), options);
  return table;
}

AblationTable run_substitution_ablation(const ExperimentSpec& base,
                                        const AblationOptions& options) {
  if (!base.variant.uses_knowledge()) {
    throw ConfigError("variant", "substitution ablation needs a sememe variant");
  }
  if (options.seeds.empty()) throw ConfigError("seeds", "at least one seed is required");

  AblationTable table;
  table.title = "substitution\t" + base.variant.name();
  table.arms = {"none", "labels", "sememes"};
  table.seeds = options.seeds;
  std::vector<GridJob> jobs;
  for (std::size_t a = 0; a < table.arms.size(); ++a) {
    for (std::size_t s = 0; s < options.seeds.size(); ++s) {
      ExperimentSpec spec = base;
      if (a == 0) spec.variant = {base.variant.base, cells::Method::Vanilla};
      spec.ablation = {a == 1 ? AblationKind::Meaningless : AblationKind::None, 1.0};
      spec.train.seed = options.seeds[s];
      spec.output_dir =
          base.output_dir / table.arms[a] / ("seed-" + std::to_string(options.seeds[s]));
      spec.validate();
      jobs.push_back({a, s, std::move(spec)});
    }
  }
  run_grid(table, std::move(jobs), options);
  return table;
}

}  // namespace sememe
