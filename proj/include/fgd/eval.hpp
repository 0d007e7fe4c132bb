#pragma once

// Ground truth, quality metrics and benchmark runs.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fgd/decoder.hpp"
#include "fgd/projection.hpp"
#include "fgd/swvg.hpp"

namespace fgd {

/// Full projection: every logit w_i^T h + b_i at 64-bit, sorted descending
/// with smaller id first on ties, softmax over the top K. Does not touch the
/// lifted points.
TopKResult oracle_topk(const VocabularyProjection& projection,
                       std::span<const double> h, std::size_t K);

/// |ids(approx) intersect ids(exact)| / K.
double precision_at_k(const TopKResult& approx, const TopKResult& exact);

struct EvalOptions {
  std::size_t warmup = 10;     ///< untimed decodes per mode before timing
  std::size_t measured = 100;  ///< timed decodes per mode, cycling the queries
  std::size_t threads = 1;     ///< workers for the (untimed) quality pass
  std::optional<SwvgParams> build_params;  ///< echoed in the report if known
};

struct QueryRecord {
  std::size_t query = 0;
  double precision = 0.0;
  bool order_match = false;  ///< graph ids equal oracle ids in the same order
  std::size_t distance_evals = 0;
  std::vector<WordId> ids;
};

struct LatencyStats {
  std::size_t samples = 0;
  double mean_us = 0.0;
  double p50_us = 0.0;
  double p90_us = 0.0;
  double p99_us = 0.0;
};

struct EvalReport {
  std::size_t vocab_size = 0;
  std::size_t dim = 0;
  std::size_t query_count = 0;
  std::size_t k = 0;
  std::size_t ef_search = 0;
  std::optional<SwvgParams> build_params;

  std::vector<QueryRecord> records;
  double mean_precision = 0.0;
  double min_precision = 0.0;
  double order_agreement = 0.0;
  double mean_distance_evals = 0.0;

  LatencyStats graph_latency;
  LatencyStats flat_latency;

  /// `key=value` lines. Metric values are printed in shortest round-trip
  /// form, so identical inputs give identical bytes when latency is excluded.
  std::string to_text(bool include_latency) const;
  /// One JSON object per query.
  std::string to_jsonl() const;
};

/// Graph-mode decode of every query against oracle_topk. Throws on the first
/// query whose dimension does not match, naming its index.
EvalReport run_eval(const Index& index, const VocabularyProjection& projection,
                    const std::vector<std::vector<double>>& queries, std::size_t K,
                    std::size_t ef_search, const EvalOptions& options = {});

enum class SynthDistribution { gaussian, zipf_scaled_gaussian };

struct SyntheticDataset {
  VocabularyProjection projection;
  FrequencyTable frequencies;
  std::vector<std::vector<double>> queries;
};

/**
 * Deterministic stand-in for a trained projection layer. Weights, biases and
 * query entries are standard normal draws from SplitMix64(seed). In zipf mode
 * row i (weights and bias) is scaled by (i + 1)^-1/4 and the counts are
 * proportional to 1 / (i + 1); gaussian mode uses uniform counts.
 */
SyntheticDataset synth_dataset(std::size_t vocab_size, std::size_t dim,
                               SynthDistribution distribution, std::uint64_t seed,
                               std::size_t query_count = 1000);

/// One query per line, whitespace-separated values.
std::vector<std::vector<double>> load_queries(const std::filesystem::path& path);
void save_queries(const std::vector<std::vector<double>>& queries,
                  const std::filesystem::path& path);

}  // namespace fgd
