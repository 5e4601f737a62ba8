#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sememe_rnn/checkpoint.hpp"
#include "sememe_rnn/trainer.hpp"

using namespace sememe;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sememe_rnn_checkpoint_test";
  fs::create_directories(dir);
  return dir / name;
}

LanguageModel model() {
  const cells::CellVariant v{cells::Base::Gru, cells::Method::Cell};
  ad::Matrix avg = ad::Matrix::Zero(6, 2);
  avg(2, 0) = avg(3, 1) = 1.0;
  return LanguageModel({v, 6, 3, 4, 4, 0.1}, avg);
}

}  // namespace

TEST_CASE("checkpoint round-trips bit-exactly") {
  LanguageModel a = model();
  init_params(a.named_parameters(), 42);
  a.output_weight.mutable_value()(0, 0) = 1.0 / 3.0;
  const nlohmann::json config{{"variant", "gru+cell"}, {"seed", 42}};
  const fs::path path = scratch("roundtrip.bin");
  save_checkpoint(path, config, a.named_parameters());

  const Checkpoint ckpt = load_checkpoint(path);
  CHECK(ckpt.config == config);
  LanguageModel b = model();
  restore_tensors(ckpt, b.named_parameters());
  const auto pa = a.named_parameters();
  const auto pb = b.named_parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CAPTURE(pa[i].name);
    CHECK(pa[i].tensor.shape() == pb[i].tensor.shape());
    CHECK(pa[i].tensor.value() == pb[i].tensor.value());
  }
  const std::vector<ad::Index> tokens{2, 3, 4, 5};
  CHECK(a.lm_forward(tokens).value() == b.lm_forward(tokens).value());
}

TEST_CASE("checkpoint errors") {
  const fs::path path = scratch("errors.bin");
  LanguageModel a = model();
  save_checkpoint(path, nlohmann::json::object(), a.named_parameters());

  SUBCASE("shape mismatch on restore") {
    const cells::CellVariant v{cells::Base::Gru, cells::Method::Cell};
    LanguageModel wider({v, 6, 3, 4, 5, 0.1}, ad::Matrix::Zero(6, 2));
    CHECK_THROWS_WITH_AS(restore_tensors(load_checkpoint(path), wider.named_parameters()),
                         doctest::Contains("shape"), std::runtime_error);
  }
  SUBCASE("truncated file") {
    const auto size = fs::file_size(path);
    fs::resize_file(path, size - 5);
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  }
  SUBCASE("not a checkpoint") {
    std::ofstream(path) << "hello";
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint(scratch("absent.bin")), std::runtime_error);
  }
}
