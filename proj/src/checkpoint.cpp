// SPDX-License-Identifier: Apache-2.0

#include "sememe_rnn/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sememe {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr std::array<char, 8> kMagic = {'S', 'M', 'R', 'N', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

std::string get_string(std::istream& in, std::uint64_t n) {
  if (n > (1ULL << 32)) throw std::runtime_error("checkpoint: corrupt length");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return s;
}

}  // namespace

const StoredTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& config,
                     const std::vector<NamedTensor>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::string text = config.dump();
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape().size()));
    for (auto d : t.shape()) put<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    out.write(reinterpret_cast<const char*>(t.value().data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error(path.string() + " is not a checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint version " + std::to_string(version) + " unsupported");
  }
  Checkpoint ckpt;
  ckpt.config = nlohmann::json::parse(get_string(in, get<std::uint64_t>(in)));
  const auto count = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    StoredTensor t;
    t.name = get_string(in, get<std::uint32_t>(in));
    const auto rank = get<std::uint32_t>(in);
    if (rank < 1 || rank > 2) throw std::runtime_error("checkpoint: bad rank for " + t.name);
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.shape.push_back(static_cast<ad::Index>(get<std::uint64_t>(in)));
    }
    const ad::Index rows = rank == 1 ? 1 : t.shape[0];
    const ad::Index cols = t.shape.back();
    t.value.resize(rows, cols);
    in.read(reinterpret_cast<char*>(t.value.data()),
            static_cast<std::streamsize>(t.value.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated tensor " + t.name);
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

void restore_tensors(const Checkpoint& checkpoint, const std::vector<NamedTensor>& targets) {
  for (auto [name, t] : targets) {
    const StoredTensor* stored = checkpoint.find(name);
    if (stored == nullptr) throw std::runtime_error("checkpoint has no tensor '" + name + "'");
    if (stored->shape != t.shape()) {
      throw std::runtime_error("checkpoint tensor '" + name + "' has shape " +
                               ad::shape_string(stored->shape) + ", model expects " +
                               ad::shape_string(t.shape()));
    }
    t.mutable_value() = stored->value;
  }
}

}  // namespace sememe
