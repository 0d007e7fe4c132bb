#include "fgd/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fgd/error.hpp"

namespace fgd {

namespace {

constexpr double kNormalizationTolerance = 1e-9;

void require_normalized(std::span<const double> y, const char* what) {
  const double sum = std::accumulate(y.begin(), y.end(), 0.0);
  if (std::abs(sum - 1.0) > kNormalizationTolerance) {
    throw InvalidArgument(std::string(what) + " sums to " + std::to_string(sum) +
                          ", expected 1");
  }
}

void require_support(std::span<const WordId> ids, std::span<const double> y,
                     std::size_t vocab_size) {
  if (ids.size() != y.size()) {
    throw InvalidArgument("top-K ids and probabilities differ in length");
  }
  if (ids.empty()) throw InvalidArgument("top-K set is empty");
  if (ids.size() > vocab_size) throw InvalidArgument("top-K set larger than vocabulary");
  std::vector<char> seen(vocab_size, 0);
  for (WordId id : ids) {
    if (id >= vocab_size) {
      throw InvalidArgument("word id " + std::to_string(id) + " out of range");
    }
    if (seen[id]) throw InvalidArgument("duplicate word id " + std::to_string(id));
    seen[id] = 1;
  }
}

}  // namespace

void SmoothedDistribution::set_support(std::span<const WordId> ids,
                                       std::vector<double> probs) {
  ids_.assign(ids.begin(), ids.end());
  probs_ = std::move(probs);
  position_.clear();
  position_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) position_.emplace(ids_[i], i);
}

double SmoothedDistribution::probability(WordId id) const {
  if (id >= vocab_size_) throw InvalidArgument("word id out of range");
  const auto it = position_.find(id);
  return it != position_.end() ? probs_[it->second] : tail_probability(id);
}

std::vector<double> SmoothedDistribution::materialize() const {
  std::vector<double> dense(vocab_size_);
  for (std::size_t j = 0; j < vocab_size_; ++j) {
    dense[j] = tail_probability(static_cast<WordId>(j));
  }
  for (std::size_t i = 0; i < ids_.size(); ++i) dense[ids_[i]] = probs_[i];
  return dense;
}

SmoothedDistribution smooth_consistent(std::span<const WordId> ids,
                                       std::span<const double> y,
                                       const FrequencyTable& freq, double epsilon) {
  const std::size_t vocab = freq.size();
  require_support(ids, y, vocab);
  for (double v : y) {
    if (!(v > 0.0)) throw InvalidArgument("top-K probabilities must be positive");
  }
  require_normalized(y, "top-K distribution");
  if (!freq.all_positive()) {
    throw InvalidArgument("frequency prior must be positive for every word");
  }
  const double min_y = *std::min_element(y.begin(), y.end());
  if (!(epsilon > 0.0) || !(epsilon < min_y)) {
    throw InvalidArgument("epsilon bound violated: need 0 < epsilon < min(y) = " +
                          std::to_string(min_y) + ", got " + std::to_string(epsilon));
  }

  SmoothedDistribution out;
  out.mode_ = SmoothingMode::consistent;
  out.epsilon_ = epsilon;
  out.vocab_size_ = vocab;
  if (ids.size() == vocab) {
    // No tail: g is undefined and the identity is the only normalized choice.
    out.set_support(ids, std::vector<double>(y.begin(), y.end()));
    return out;
  }
  std::vector<double> probs(y.size());
  double topk_freq = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    probs[i] = y[i] / (1.0 + epsilon);
    topk_freq += freq[ids[i]];
  }
  const double tail_freq = freq.total() - topk_freq;
  out.set_support(ids, std::move(probs));
  out.frequencies_ = &freq;
  out.tail_scale_ = epsilon / (tail_freq * (1.0 + epsilon));
  return out;
}

SmoothedDistribution smooth_consistent(std::span<const WordId> ids,
                                       std::span<const double> y,
                                       const FrequencyTable& freq,
                                       EpsilonPolicy policy) {
  if (!(policy.fraction > 0.0) || !(policy.fraction < 1.0)) {
    throw InvalidArgument("epsilon fraction must lie in (0, 1)");
  }
  if (y.empty()) throw InvalidArgument("top-K set is empty");
  const double min_y = *std::min_element(y.begin(), y.end());
  return smooth_consistent(ids, y, freq, policy.fraction * min_y);
}

SmoothedDistribution smooth_laplacian(std::span<const double> y,
                                      const FrequencyTable& freq, double epsilon) {
  if (y.size() != freq.size()) {
    throw InvalidArgument("dense distribution length " + std::to_string(y.size()) +
                          " does not match vocabulary size " +
                          std::to_string(freq.size()));
  }
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw InvalidArgument("epsilon must be positive and finite");
  }
  for (double v : y) {
    if (!(v >= 0.0)) throw InvalidArgument("probabilities must be non-negative");
  }
  require_normalized(y, "distribution");
  require_normalized(freq.normalized(), "frequency prior");

  std::vector<WordId> support;
  std::vector<double> probs;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] > 0.0) {
      support.push_back(static_cast<WordId>(i));
      probs.push_back((y[i] + epsilon * freq[static_cast<WordId>(i)]) / (1.0 + epsilon));
    }
  }
  SmoothedDistribution out;
  out.mode_ = SmoothingMode::laplacian;
  out.epsilon_ = epsilon;
  out.vocab_size_ = y.size();
  out.set_support(support, std::move(probs));
  out.frequencies_ = &freq;
  out.tail_scale_ = epsilon / (1.0 + epsilon);
  return out;
}

SmoothedDistribution smooth_winners_take_all(std::span<const WordId> ids,
                                             std::span<const double> y,
                                             std::size_t vocab_size,
                                             double epsilon_tail) {
  require_support(ids, y, vocab_size);
  for (double v : y) {
    if (!(v >= 0.0)) throw InvalidArgument("probabilities must be non-negative");
  }
  require_normalized(y, "top-K distribution");
  if (!(epsilon_tail > 0.0) || !std::isfinite(epsilon_tail)) {
    throw InvalidArgument("epsilon_tail must be positive and finite");
  }
  const double tail_words = static_cast<double>(vocab_size - ids.size());
  const double tail_mass = epsilon_tail * tail_words;
  if (!(tail_mass < 1.0)) {
    throw InvalidArgument("tail mass " + std::to_string(tail_mass) +
                          " must be below 1");
  }
  std::vector<double> probs(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) probs[i] = y[i] * (1.0 - tail_mass);

  SmoothedDistribution out;
  out.mode_ = SmoothingMode::winners_take_all;
  out.epsilon_ = epsilon_tail;
  out.vocab_size_ = vocab_size;
  out.set_support(ids, std::move(probs));
  out.tail_scale_ = epsilon_tail;
  return out;
}

ConsistencyReport check_consistency(const SmoothedDistribution& dist,
                                    std::span<const double> y) {
  const auto& ids = dist.topk_ids();
  const auto& smoothed = dist.topk_probs();
  if (y.size() != ids.size()) {
    throw InvalidArgument("original distribution does not align with the top-K set");
  }
  ConsistencyReport report;

  report.positivity = std::all_of(smoothed.begin(), smoothed.end(),
                                  [](double p) { return p > 0.0; });
  double tail_max = 0.0;
  for (std::size_t j = 0; j < dist.vocab_size(); ++j) {
    const auto id = static_cast<WordId>(j);
    if (dist.in_topk(id)) continue;
    const double p = dist.tail_probability(id);
    report.positivity = report.positivity && p > 0.0;
    tail_max = std::max(tail_max, p);
  }

  report.order_preserved = true;
  for (std::size_t i = 0; i < ids.size() && report.order_preserved; ++i) {
    for (std::size_t j = 0; j < ids.size(); ++j) {
      if ((y[i] <= y[j]) != (smoothed[i] <= smoothed[j])) {
        report.order_preserved = false;
        break;
      }
    }
  }

  const double topk_min =
      smoothed.empty() ? 0.0 : *std::min_element(smoothed.begin(), smoothed.end());
  report.topk_dominates = ids.size() == dist.vocab_size() || topk_min >= tail_max;
  return report;
}

}  // namespace fgd
