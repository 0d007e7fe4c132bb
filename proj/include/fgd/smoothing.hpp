#pragma once

// Turning a top-K distribution into a full-vocabulary one.
//
// Three schemes are provided:
//  - consistent: y~_i = (y_i + eps g_i) / (1 + eps), g = f conditioned on the
//    words outside the top-K set, with 0 < eps < min top-K probability. Keeps
//    every probability positive, the top-K order intact, and every top-K word
//    at least as likely as any other word.
//  - laplacian: y~_i = (y_i + eps f_i) / (1 + eps) over a dense y. Not
//    consistent in general.
//  - winners_take_all: every word outside the top-K set gets a fixed eps and
//    the top-K mass is scaled down to compensate.
//
// Words outside the top-K set are never materialized; their probability comes
// from a closed-form tail rule evaluated per id in O(1).

#include <cstddef>
#include <span>
#include <unordered_map>
#include <vector>

#include "fgd/projection.hpp"

namespace fgd {

enum class SmoothingMode { consistent, laplacian, winners_take_all };

class SmoothedDistribution {
 public:
  SmoothingMode mode() const noexcept { return mode_; }
  double epsilon() const noexcept { return epsilon_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }

  /// The support set K and its smoothed probabilities, aligned.
  const std::vector<WordId>& topk_ids() const noexcept { return ids_; }
  const std::vector<double>& topk_probs() const noexcept { return probs_; }

  bool in_topk(WordId id) const { return position_.count(id) != 0; }

  /// Probability of any word; O(1).
  double probability(WordId id) const;

  /// Probability of a word outside the top-K set under the tail rule.
  double tail_probability(WordId id) const noexcept {
    return frequencies_ ? tail_scale_ * (*frequencies_)[id] : tail_scale_;
  }

  /// Dense length-|V| vector; entrywise equal to probability().
  std::vector<double> materialize() const;

 private:
  friend SmoothedDistribution smooth_consistent(std::span<const WordId>,
                                                std::span<const double>,
                                                const FrequencyTable&, double);
  friend SmoothedDistribution smooth_laplacian(std::span<const double>,
                                               const FrequencyTable&, double);
  friend SmoothedDistribution smooth_winners_take_all(std::span<const WordId>,
                                                      std::span<const double>,
                                                      std::size_t, double);

  void set_support(std::span<const WordId> ids, std::vector<double> probs);

  SmoothingMode mode_ = SmoothingMode::consistent;
  double epsilon_ = 0.0;
  std::size_t vocab_size_ = 0;
  std::vector<WordId> ids_;
  std::vector<double> probs_;
  std::unordered_map<WordId, std::size_t> position_;
  // Tail rule: tail_scale_ * f_j, or the constant tail_scale_ when no table.
  // The table is borrowed and must outlive the distribution.
  const FrequencyTable* frequencies_ = nullptr;
  double tail_scale_ = 0.0;
};

/// Epsilon chosen as fraction * min(y) with fraction in (0, 1).
struct EpsilonPolicy {
  double fraction = 0.5;
};

/// Requires y_i > 0, sum(y) == 1 within 1e-9, unique in-range ids, all
/// f_i > 0, and 0 < epsilon < min(y) strictly. When the top-K set covers
/// the whole vocabulary y is returned unchanged.
SmoothedDistribution smooth_consistent(std::span<const WordId> ids,
                                       std::span<const double> y,
                                       const FrequencyTable& freq, double epsilon);
SmoothedDistribution smooth_consistent(std::span<const WordId> ids,
                                       std::span<const double> y,
                                       const FrequencyTable& freq,
                                       EpsilonPolicy policy);

/// y is dense over the vocabulary (zeros allowed); its non-zero entries form
/// the support set of the result.
SmoothedDistribution smooth_laplacian(std::span<const double> y,
                                      const FrequencyTable& freq, double epsilon);

/// Requires epsilon_tail * (|V| - K) < 1.
SmoothedDistribution smooth_winners_take_all(std::span<const WordId> ids,
                                             std::span<const double> y,
                                             std::size_t vocab_size,
                                             double epsilon_tail);

struct ConsistencyReport {
  bool positivity = false;       ///< every smoothed probability > 0
  bool order_preserved = false;  ///< y_i <= y_j iff y~_i <= y~_j within K
  bool topk_dominates = false;   ///< y~_i >= y~_j for i in K, j outside

  bool consistent() const noexcept {
    return positivity && order_preserved && topk_dominates;
  }
};

/// Evaluates the three consistency conditions over the whole vocabulary.
/// `y` is the original distribution aligned with dist.topk_ids().
ConsistencyReport check_consistency(const SmoothedDistribution& dist,
                                    std::span<const double> y);

}  // namespace fgd
