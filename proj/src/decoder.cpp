#include "fgd/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fgd/error.hpp"

namespace fgd {

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> probs(logits.size());
  if (logits.empty()) return probs;
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - top);
    sum += probs[i];
  }
  for (auto& p : probs) p /= sum;
  return probs;
}

template <typename Scalar>
TopKResult decode_topk(const BasicIndex<Scalar>& index, std::span<const double> h,
                       std::size_t K, std::size_t ef_search, SearchMode mode,
                       SearchScratch* scratch) {
  const std::size_t n = index.vocab_size();
  if (K == 0 || K > n) {
    throw InvalidArgument("K=" + std::to_string(K) + " is outside [1, " +
                          std::to_string(n) + "]");
  }
  const auto q = transform_query(h, index.source_dim());
  const SearchResult found = mode == SearchMode::graph
                                 ? search_topk(index.graph, index.points, q, K,
                                               ef_search, scratch)
                                 : flat_search(index.points, q, K);

  TopKResult out;
  out.k = K;
  out.exact = mode == SearchMode::flat;
  out.distance_evals = found.distance_evals;
  const std::size_t m = found.ids.size();
  std::vector<std::size_t> order(m);
  std::vector<double> logits(m);
  for (std::size_t i = 0; i < m; ++i) {
    logits[i] = distance_to_logit(found.dists_sq[i], index.bound(), q.h_norm_sq);
  }
  // Distances arrive sorted, but two distinct distances can round to the same
  // logit; re-sort so the (logit desc, id asc) contract holds exactly.
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (logits[a] != logits[b]) return logits[a] > logits[b];
    return found.ids[a] < found.ids[b];
  });
  out.ids.reserve(m);
  out.logits.reserve(m);
  for (std::size_t i : order) {
    out.ids.push_back(found.ids[i]);
    out.logits.push_back(logits[i]);
  }
  out.probs = softmax(out.logits);
  return out;
}

template <typename Scalar>
std::vector<TopKResult> batch_decode(const BasicIndex<Scalar>& index,
                                     const std::vector<std::vector<double>>& queries,
                                     std::size_t K, std::size_t ef_search,
                                     SearchMode mode) {
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (queries[i].size() != index.source_dim()) {
      throw DimensionError("query " + std::to_string(i) + ": context vector has dimension " +
                           std::to_string(queries[i].size()) + ", index expects " +
                           std::to_string(index.source_dim()));
    }
  }
  std::vector<TopKResult> results;
  results.reserve(queries.size());
  SearchScratch scratch(index.vocab_size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    try {
      results.push_back(decode_topk(index, queries[i], K, ef_search, mode, &scratch));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("query " + std::to_string(i) + ": " + e.what());
    }
  }
  return results;
}

template TopKResult decode_topk<float>(const BasicIndex<float>&, std::span<const double>,
                                       std::size_t, std::size_t, SearchMode,
                                       SearchScratch*);
template TopKResult decode_topk<double>(const BasicIndex<double>&, std::span<const double>,
                                        std::size_t, std::size_t, SearchMode,
                                        SearchScratch*);
template std::vector<TopKResult> batch_decode<float>(const BasicIndex<float>&,
                                                     const std::vector<std::vector<double>>&,
                                                     std::size_t, std::size_t, SearchMode);
template std::vector<TopKResult> batch_decode<double>(const BasicIndex<double>&,
                                                      const std::vector<std::vector<double>>&,
                                                      std::size_t, std::size_t, SearchMode);

}  // namespace fgd
