#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sememe_rnn/checkpoint.hpp"
#include "sememe_rnn/experiment.hpp"

using namespace sememe;
namespace fs = std::filesystem;

namespace {

const fs::path kData = TEST_DATA_DIR;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sememe_rnn_experiment_test" / name;
  fs::remove_all(dir);
  return dir;
}

ExperimentSpec tiny_lm(const std::string& variant, const std::string& out) {
  ExperimentSpec s;
  s.variant = cells::CellVariant::parse(variant);
  s.train_path = kData / "tiny_train.txt";
  s.valid_path = kData / "tiny_valid.txt";
  s.lexicon_path = kData / "tiny_lexicon.tsv";
  s.train = lm_preset(Preset::Tiny, s.variant.base);
  s.train.max_epochs = 3;
  s.train.batch_size = 4;
  s.train.bptt_len = 8;
  s.train.eval_batch_size = 2;
  s.dims = {8, 8, 8};
  s.output_dir = scratch(out);
  return s;
}

ExperimentSpec tiny_pair(const std::string& out) {
  ExperimentSpec s;
  s.task = Task::Pair;
  s.variant = cells::CellVariant::parse("gru+concat");
  s.bidirectional = true;
  s.train_path = kData / "tiny_pairs_train.tsv";
  s.valid_path = kData / "tiny_pairs_valid.tsv";
  s.lexicon_path = kData / "tiny_lexicon.tsv";
  s.embeddings_path = kData / "tiny_vectors.txt";
  s.train = pair_preset(Preset::Tiny);
  s.train.max_epochs = 2;
  s.train.batch_size = 10;
  s.dims = {8, 6, 6};
  s.output_dir = scratch(out);
  return s;
}

std::vector<std::string> log_rows(const fs::path& dir) {
  std::ifstream in(dir / "train.log");
  std::vector<std::string> rows;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#' || line.rfind("epoch\t", 0) == 0) continue;
    rows.push_back(line.substr(0, line.rfind('\t')));  // drop wall time
  }
  return rows;
}

std::string field_of(const ExperimentSpec& spec) {
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_CASE("spec validation names the field") {
  ExperimentSpec s = tiny_lm("lstm+gate", "validate");
  CHECK(field_of(s) == "");
  s.lexicon_path.clear();
  CHECK(field_of(s) == "lexicon");
  s = tiny_lm("lstm", "validate");
  s.lexicon_path.clear();
  CHECK(field_of(s) == "");
  s.bidirectional = true;
  CHECK(field_of(s) == "bidirectional");
  s = tiny_lm("lstm+cell", "validate");
  s.ablation = {AblationKind::Coverage, 1.5};
  CHECK(field_of(s) == "coverage");
  s = tiny_lm("lstm", "validate");
  s.train_path = kData / "missing.txt";
  CHECK(field_of(s) == "train");
  s = tiny_lm("gru+gate", "validate");
  s.dims.sememe = 3;
  CHECK(field_of(s) == "sememe-dim");
  s = tiny_lm("lstm", "validate");
  s.train.dropout = -0.1;
  CHECK(field_of(s) == "train");
}

TEST_CASE("spec JSON round-trip") {
  ExperimentSpec s = tiny_pair("json");
  s.ablation = {AblationKind::Coverage, 0.25};
  s.pooling = Pooling::Max;
  s.train.seed = 0xfedcba9876543210ULL;
  const ExperimentSpec back = spec_from_json(spec_to_json(s));
  CHECK(spec_to_json(back) == spec_to_json(s));
  CHECK(back.train.seed == s.train.seed);
}

TEST_CASE("train writes artifacts and eval reproduces the validation metric") {
  const ExperimentSpec spec = tiny_lm("lstm+cell", "train_eval");
  const TrainOutcome o = run_train(spec);
  CHECK(fs::exists(spec.output_dir / "checkpoint.bin"));
  CHECK(fs::exists(spec.output_dir / "config.json"));
  CHECK(fs::exists(spec.output_dir / "result.tsv"));
  CHECK(log_rows(spec.output_dir).size() == 3);
  CHECK(o.valid_metric == *o.state.best_metric);

  const EvalReport r = run_eval(spec.output_dir / "checkpoint.bin", spec.valid_path);
  CHECK(std::abs(r.metric() - o.valid_metric) < 1e-9);

  std::ostringstream records;
  print_eval_records(records, r);
  CHECK(records.str().rfind("eval\tlm\tperplexity\t", 0) == 0);
  std::ostringstream human;
  print_eval_human(human, r);
  CHECK(human.str().find("perplexity") != std::string::npos);

  const std::string row = format_train_record(spec, o);
  CHECK(std::count(row.begin(), row.end(), '\t') ==
        std::count(kTrainRecordHeader.begin(), kTrainRecordHeader.end(), '\t'));
}

TEST_CASE("identical specs give identical logs") {
  const ExperimentSpec a = tiny_lm("gru+gate", "determinism_a");
  ExperimentSpec b = a;
  b.output_dir = scratch("determinism_b");
  const TrainOutcome oa = run_train(a);
  const TrainOutcome ob = run_train(b);
  CHECK(log_rows(a.output_dir) == log_rows(b.output_dir));
  CHECK(oa.test_metric == ob.test_metric);
}

TEST_CASE("resume continues the epoch count") {
  ExperimentSpec spec = tiny_lm("lstm", "resume");
  spec.train.max_epochs = 2;
  run_train(spec);
  spec.train.max_epochs = 4;
  const TrainOutcome o = run_train(spec, nullptr, spec.output_dir);
  CHECK(o.state.epoch == 4);
  CHECK(o.state.history.size() == 4);
  CHECK(log_rows(spec.output_dir).size() == 4);
}

TEST_CASE("coverage ablation records the masked word count") {
  ExperimentSpec spec = tiny_lm("lstm+concat", "masked");
  spec.ablation = {AblationKind::Coverage, 0.5};
  spec.train.max_epochs = 1;
  const TrainOutcome o = run_train(spec);
  // 12 annotated words in the fixture lexicon.
  CHECK(o.annotated_words == 12);
  CHECK(o.masked_words == static_cast<std::size_t>(std::llround(0.5 * 12)));
  std::ifstream log(spec.output_dir / "train.log");
  std::stringstream text;
  text << log.rdbuf();
  CHECK(text.str().find("masked_words=6") != std::string::npos);
}

TEST_CASE("coverage grid shape and its definitional rows") {
  ExperimentSpec base = tiny_lm("lstm+gate", "grid");
  base.train.max_epochs = 2;
  const AblationTable t = run_coverage_ablation(base, {0.0, 0.5, 1.0}, {{3}, 1, nullptr});
  REQUIRE(t.arms.size() == 3);
  const std::string text = format_table(t);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);

  // Fraction 1 is a plain run with the same seed.
  ExperimentSpec plain = base;
  plain.train.seed = 3;
  plain.output_dir = scratch("grid_plain");
  CHECK(run_train(plain).test_metric == t.test[2][0]);

  // Fraction 0 is a run whose lexicon is empty.
  const fs::path empty = scratch("grid_empty_lexicon");
  fs::create_directories(empty);
  std::ofstream(empty / "lexicon.tsv") << "# nothing annotated\n";
  ExperimentSpec bare = plain;
  bare.lexicon_path = empty / "lexicon.tsv";
  bare.output_dir = empty / "run";
  CHECK(run_train(bare).test_metric == t.test[0][0]);
}

TEST_CASE("substitution table has none, labels and sememes rows") {
  ExperimentSpec base = tiny_lm("lstm+concat", "substitute");
  base.train.max_epochs = 1;
  const AblationTable t = run_substitution_ablation(base, {{1, 2}, 2, nullptr});
  CHECK(t.arms == std::vector<std::string>{"none", "labels", "sememes"});
  for (const auto& row : t.test) {
    REQUIRE(row.size() == 2);
    for (double v : row) CHECK(std::isfinite(v));
  }
  CHECK(t.test[0] != t.test[2]);
}

TEST_CASE("pair task end to end") {
  const ExperimentSpec spec = tiny_pair("pair");
  const TrainOutcome o = run_train(spec);
  const EvalReport r = run_eval(spec.output_dir / "checkpoint.bin", spec.valid_path);
  CHECK(r.task == Task::Pair);
  CHECK(std::abs(r.metric() - o.valid_metric) < 1e-9);
  CHECK(r.examples == 15);

  // Frozen pretrained rows survive training unchanged.
  const Checkpoint ckpt = load_checkpoint(spec.output_dir / "checkpoint.bin");
  const auto vocab = ckpt.config.at("vocab").get<std::vector<std::string>>();
  const auto it = std::find(vocab.begin(), vocab.end(), "cat");
  REQUIRE(it != vocab.end());
  std::ifstream vectors(spec.embeddings_path);
  std::string word;
  double first = 0.0;
  while (vectors >> word) {
    vectors >> first;
    if (word == "cat") break;
    vectors.ignore(1 << 20, '\n');
  }
  const auto row = static_cast<ad::Index>(it - vocab.begin());
  CHECK(ckpt.find("embedding.words")->value(row, 0) == first);

  std::ostringstream out;
  print_eval_records(out, r);
  const std::string text = out.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 10);
}

TEST_CASE("constant predictor scores one third on balanced data") {
  std::vector<EncodedPair> data;
  for (int i = 0; i < 30; ++i) data.push_back({static_cast<PairLabel>(i % 3), {2, 3}, {4}});
  PairClassifier model({cells::CellVariant::parse("lstm"), false, 6, 4, 0, 4, 0.0, Pooling::Final},
                       ad::Matrix::Zero(6, 0));
  const PairEvaluation ev = evaluate_pairs(model, data);
  CHECK(ev.accuracy == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("eval rejects a tampered vocabulary") {
  const ExperimentSpec spec = tiny_lm("lstm", "tamper");
  ExperimentSpec small = spec;
  small.train.max_epochs = 1;
  run_train(small);
  Checkpoint ckpt = load_checkpoint(spec.output_dir / "checkpoint.bin");
  ckpt.config["vocab"][2] = "zebra";
  std::vector<NamedTensor> tensors;
  for (const auto& t : ckpt.tensors) tensors.push_back({t.name, ad::Tensor(t.value, t.shape)});
  save_checkpoint(spec.output_dir / "tampered.bin", ckpt.config, tensors);
  CHECK_THROWS_WITH(run_eval(spec.output_dir / "tampered.bin", spec.valid_path),
                    doctest::Contains("fingerprint"));
}
