#include <cmath>
#include <string>

#include "fgd/error.hpp"
#include "fgd/eval.hpp"
#include "fgd/rng.hpp"

namespace fgd {

SyntheticDataset synth_dataset(std::size_t vocab_size, std::size_t dim,
                               SynthDistribution distribution, std::uint64_t seed,
                               std::size_t query_count) {
  if (vocab_size == 0 || dim == 0) {
    throw InvalidArgument("synthetic vocab and dim must be >= 1");
  }
  SplitMix64 rng(seed);
  const bool zipf = distribution == SynthDistribution::zipf_scaled_gaussian;

  std::vector<std::string> tokens(vocab_size);
  std::vector<float> weights(vocab_size * dim);
  std::vector<float> biases(vocab_size);
  std::vector<double> counts(vocab_size, 1.0);
  for (std::size_t i = 0; i < vocab_size; ++i) {
    tokens[i] = "w" + std::to_string(i);
    const double rank = static_cast<double>(i + 1);
    const double scale = zipf ? std::pow(rank, -0.25) : 1.0;
    for (std::size_t k = 0; k < dim; ++k) {
      weights[i * dim + k] = static_cast<float>(scale * rng.normal());
    }
    biases[i] = static_cast<float>(scale * rng.normal());
    if (zipf) counts[i] = static_cast<double>(vocab_size) / rank;
  }

  std::vector<std::vector<double>> queries(query_count, std::vector<double>(dim));
  for (auto& q : queries) {
    for (auto& v : q) v = rng.normal();
  }
  return SyntheticDataset{
      VocabularyProjection(std::move(tokens), std::move(weights), std::move(biases),
                           dim, true),
      FrequencyTable(std::move(counts)),
      std::move(queries),
  };
}

}  // namespace fgd
