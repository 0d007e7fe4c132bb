#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fgd/swvg.hpp"

namespace fgd {

enum class SearchMode { graph, flat };

/// One decoded query: ids by logit descending (ties: smaller id first),
/// logits recovered from distances, softmax over the K logits.
struct TopKResult {
  std::vector<WordId> ids;
  std::vector<double> logits;
  std::vector<double> probs;
  std::size_t k = 0;
  bool exact = false;
  std::size_t distance_evals = 0;
};

/// Numerically stable softmax (max-subtracted).
std::vector<double> softmax(std::span<const double> logits);

/// Transforms h, retrieves K words by graph or flat search, and converts
/// each squared distance back to its logit in O(1) without re-dotting.
template <typename Scalar>
TopKResult decode_topk(const BasicIndex<Scalar>& index, std::span<const double> h,
                       std::size_t K, std::size_t ef_search, SearchMode mode,
                       SearchScratch* scratch = nullptr);

/// decode_topk over each row, in order. Dimensions are checked up front and
/// the first mismatching query is named in the error.
template <typename Scalar>
std::vector<TopKResult> batch_decode(const BasicIndex<Scalar>& index,
                                     const std::vector<std::vector<double>>& queries,
                                     std::size_t K, std::size_t ef_search,
                                     SearchMode mode);

}  // namespace fgd
