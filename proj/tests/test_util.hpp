#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "fgd/projection.hpp"

namespace fgd::testing {

// Gaussian projection from std::mt19937_64, independent of the library RNG.
inline VocabularyProjection random_projection(std::size_t vocab, std::size_t dim,
                                              std::uint64_t seed, bool bias = true,
                                              double scale = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<std::string> tokens(vocab);
  std::vector<float> weights(vocab * dim);
  std::vector<float> biases;
  for (std::size_t i = 0; i < vocab; ++i) tokens[i] = "t" + std::to_string(i);
  for (auto& w : weights) w = static_cast<float>(normal(gen));
  if (bias) {
    biases.resize(vocab);
    for (auto& b : biases) b = static_cast<float>(normal(gen));
  }
  return VocabularyProjection(std::move(tokens), std::move(weights), std::move(biases),
                              dim, bias);
}

inline std::vector<double> random_vector(std::size_t dim, std::mt19937_64& gen,
                                         double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> h(dim);
  for (auto& v : h) v = normal(gen);
  return h;
}

// Reference logits in long double.
inline std::vector<long double> direct_logits(const VocabularyProjection& p,
                                              const std::vector<double>& h) {
  std::vector<long double> out(p.vocab_size());
  for (std::size_t i = 0; i < p.vocab_size(); ++i) {
    long double acc = p.bias(static_cast<WordId>(i));
    const auto w = p.weights(static_cast<WordId>(i));
    for (std::size_t k = 0; k < h.size(); ++k) {
      acc += static_cast<long double>(w[k]) * static_cast<long double>(h[k]);
    }
    out[i] = acc;
  }
  return out;
}

// Full stable ranking by (logit desc, id asc).
inline std::vector<WordId> reference_ranking(const VocabularyProjection& p,
                                             const std::vector<double>& h) {
  const auto logits = direct_logits(p, h);
  std::vector<WordId> ids(p.vocab_size());
  std::iota(ids.begin(), ids.end(), WordId{0});
  std::stable_sort(ids.begin(), ids.end(),
                   [&](WordId a, WordId b) { return logits[a] > logits[b]; });
  return ids;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("fgd_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace fgd::testing
