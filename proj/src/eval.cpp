#include "fgd/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>
#include <unordered_set>

#include <json.hpp>

#include "fgd/error.hpp"
#include "io_util.hpp"

namespace fgd {

TopKResult oracle_topk(const VocabularyProjection& projection,
                       std::span<const double> h, std::size_t K) {
  const std::size_t n = projection.vocab_size();
  if (h.size() != projection.dim()) {
    throw DimensionError("context vector has dimension " + std::to_string(h.size()) +
                         ", projection expects " + std::to_string(projection.dim()));
  }
  if (K == 0 || K > n) {
    throw InvalidArgument("K=" + std::to_string(K) + " is outside [1, " +
                          std::to_string(n) + "]");
  }
  std::vector<double> logits(n);
  for (std::size_t i = 0; i < n; ++i) {
    logits[i] = projection.logit(static_cast<WordId>(i), h);
  }
  std::vector<WordId> order(n);
  std::iota(order.begin(), order.end(), WordId{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(K),
                    order.end(), [&](WordId a, WordId b) {
                      if (logits[a] != logits[b]) return logits[a] > logits[b];
                      return a < b;
                    });
  TopKResult out;
  out.k = K;
  out.exact = true;
  out.distance_evals = n;
  out.ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(K));
  out.logits.reserve(K);
  for (WordId id : out.ids) out.logits.push_back(logits[id]);
  out.probs = softmax(out.logits);
  return out;
}

double precision_at_k(const TopKResult& approx, const TopKResult& exact) {
  if (approx.k != exact.k || approx.k == 0) {
    throw InvalidArgument("precision@K needs equal positive K (got " +
                          std::to_string(approx.k) + " and " +
                          std::to_string(exact.k) + ")");
  }
  const std::unordered_set<WordId> truth(exact.ids.begin(), exact.ids.end());
  std::size_t hits = 0;
  for (WordId id : approx.ids) hits += truth.count(id);
  return static_cast<double>(hits) / static_cast<double>(exact.k);
}

namespace {

LatencyStats summarize(std::vector<double> samples_us) {
  LatencyStats stats;
  stats.samples = samples_us.size();
  if (samples_us.empty()) return stats;
  std::sort(samples_us.begin(), samples_us.end());
  stats.mean_us = std::accumulate(samples_us.begin(), samples_us.end(), 0.0) /
                  static_cast<double>(samples_us.size());
  // Nearest-rank percentiles.
  auto rank = [&](double p) {
    const auto r = static_cast<std::size_t>(
        std::ceil(p * static_cast<double>(samples_us.size())));
    return samples_us[std::clamp<std::size_t>(r, 1, samples_us.size()) - 1];
  };
  stats.p50_us = rank(0.50);
  stats.p90_us = rank(0.90);
  stats.p99_us = rank(0.99);
  return stats;
}

QueryRecord evaluate_query(const Index& index, const VocabularyProjection& projection,
                           std::span<const double> h, std::size_t query,
                           std::size_t K, std::size_t ef_search,
                           SearchScratch& scratch) {
  const auto approx = decode_topk(index, h, K, ef_search, SearchMode::graph, &scratch);
  const auto exact = oracle_topk(projection, h, K);
  QueryRecord record;
  record.query = query;
  record.precision = precision_at_k(approx, exact);
  record.order_match = approx.ids == exact.ids;
  record.distance_evals = approx.distance_evals;
  record.ids = approx.ids;
  return record;
}

void append_kv(std::string& out, const char* key, double value) {
  out += key;
  out += '=';
  detail::append_number(out, value);
  out += '\n';
}

void append_kv(std::string& out, const char* key, std::uint64_t value) {
  out += key;
  out += '=';
  out += std::to_string(value);
  out += '\n';
}

}  // namespace

EvalReport run_eval(const Index& index, const VocabularyProjection& projection,
                    const std::vector<std::vector<double>>& queries, std::size_t K,
                    std::size_t ef_search, const EvalOptions& options) {
  if (queries.empty()) throw InvalidArgument("no queries");
  if (projection.vocab_size() != index.vocab_size() ||
      projection.dim() != index.source_dim()) {
    throw InvalidArgument("projection (" + std::to_string(projection.vocab_size()) +
                          " x " + std::to_string(projection.dim()) +
                          ") does not match index (" +
                          std::to_string(index.vocab_size()) + " x " +
                          std::to_string(index.source_dim()) + ")");
  }
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (queries[i].size() != index.source_dim()) {
      throw DimensionError("query " + std::to_string(i) +
                           ": context vector has dimension " +
                           std::to_string(queries[i].size()) + ", index expects " +
                           std::to_string(index.source_dim()));
    }
  }
  if (K == 0 || K > index.vocab_size()) {
    throw InvalidArgument("K=" + std::to_string(K) + " is outside [1, " +
                          std::to_string(index.vocab_size()) + "]");
  }
  if (ef_search < K) {
    throw InvalidArgument("ef_search=" + std::to_string(ef_search) +
                          " is smaller than K=" + std::to_string(K));
  }

  EvalReport report;
  report.vocab_size = index.vocab_size();
  report.dim = index.source_dim();
  report.query_count = queries.size();
  report.k = K;
  report.ef_search = ef_search;
  report.build_params = options.build_params;
  report.records.resize(queries.size());

  // Quality pass. Each worker owns a contiguous slice and its own scratch, so
  // results do not depend on the thread count.
  const std::size_t workers =
      std::max<std::size_t>(1, std::min(options.threads, queries.size()));
  auto run_slice = [&](std::size_t begin, std::size_t end) {
    SearchScratch scratch(index.vocab_size());
    for (std::size_t i = begin; i < end; ++i) {
      report.records[i] =
          evaluate_query(index, projection, queries[i], i, K, ef_search, scratch);
    }
  };
  if (workers == 1) {
    run_slice(0, queries.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (queries.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(queries.size(), begin + chunk);
      if (begin < end) pool.emplace_back(run_slice, begin, end);
    }
    for (auto& t : pool) t.join();
  }

  double precision_sum = 0.0;
  double evals_sum = 0.0;
  std::size_t order_matches = 0;
  report.min_precision = 1.0;
  for (const auto& r : report.records) {
    precision_sum += r.precision;
    evals_sum += static_cast<double>(r.distance_evals);
    order_matches += r.order_match ? 1 : 0;
    report.min_precision = std::min(report.min_precision, r.precision);
  }
  const auto count = static_cast<double>(queries.size());
  report.mean_precision = precision_sum / count;
  report.mean_distance_evals = evals_sum / count;
  report.order_agreement = static_cast<double>(order_matches) / count;

  // Latency pass, sequential.
  if (options.measured > 0) {
    SearchScratch scratch(index.vocab_size());
    auto time_mode = [&](SearchMode mode) {
      for (std::size_t i = 0; i < options.warmup; ++i) {
        decode_topk(index, queries[i % queries.size()], K, ef_search, mode, &scratch);
      }
      std::vector<double> samples;
      samples.reserve(options.measured);
      for (std::size_t i = 0; i < options.measured; ++i) {
        const auto start = std::chrono::steady_clock::now();
        const auto result =
            decode_topk(index, queries[i % queries.size()], K, ef_search, mode, &scratch);
        const auto stop = std::chrono::steady_clock::now();
        if (result.ids.empty()) throw Error("empty decode result");
        samples.push_back(
            std::chrono::duration<double, std::micro>(stop - start).count());
      }
      return summarize(std::move(samples));
    };
    report.graph_latency = time_mode(SearchMode::graph);
    report.flat_latency = time_mode(SearchMode::flat);
  }
  return report;
}

std::string EvalReport::to_text(bool include_latency) const {
  std::string out;
  append_kv(out, "vocab_size", std::uint64_t{vocab_size});
  append_kv(out, "dim", std::uint64_t{dim});
  append_kv(out, "queries", std::uint64_t{query_count});
  append_kv(out, "k", std::uint64_t{k});
  append_kv(out, "ef_search", std::uint64_t{ef_search});
  if (build_params) {
    append_kv(out, "M", std::uint64_t{build_params->M});
    append_kv(out, "M0", std::uint64_t{build_params->max_neighbors0()});
    append_kv(out, "ef_construction", std::uint64_t{build_params->ef_construction});
    append_kv(out, "level_mult", build_params->effective_level_mult());
    append_kv(out, "seed", std::uint64_t{build_params->seed});
  }
  append_kv(out, "mean_precision_at_k", mean_precision);
  append_kv(out, "min_precision_at_k", min_precision);
  append_kv(out, "order_agreement", order_agreement);
  append_kv(out, "mean_distance_evals", mean_distance_evals);
  append_kv(out, "mean_distance_evals_fraction",
            mean_distance_evals / static_cast<double>(vocab_size));
  if (include_latency) {
    auto latency = [&](const char* prefix, const LatencyStats& s) {
      const std::string p(prefix);
      append_kv(out, (p + "_samples").c_str(), std::uint64_t{s.samples});
      append_kv(out, (p + "_mean_us").c_str(), s.mean_us);
      append_kv(out, (p + "_p50_us").c_str(), s.p50_us);
      append_kv(out, (p + "_p90_us").c_str(), s.p90_us);
      append_kv(out, (p + "_p99_us").c_str(), s.p99_us);
    };
    latency("latency_graph", graph_latency);
    latency("latency_flat", flat_latency);
    if (graph_latency.p50_us > 0.0) {
      append_kv(out, "speedup_p50", flat_latency.p50_us / graph_latency.p50_us);
    }
  }
  return out;
}

std::string EvalReport::to_jsonl() const {
  std::string out;
  for (const auto& r : records) {
    nlohmann::json line = {
        {"query", r.query},
        {"k", k},
        {"ef_search", ef_search},
        {"precision_at_k", r.precision},
        {"order_match", r.order_match},
        {"distance_evals", r.distance_evals},
        {"ids", r.ids},
    };
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::vector<std::vector<double>> load_queries(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  const std::string where = path.string();
  detail::LineCursor lines(std::string_view(bytes.data(), bytes.size()));
  std::vector<std::vector<double>> queries;
  std::string_view line;
  while (lines.next(line)) {
    const auto fields = detail::split_fields(line);
    if (fields.empty()) continue;
    std::vector<double> q;
    q.reserve(fields.size());
    for (auto field : fields) {
      double v = 0.0;
      if (!detail::parse_number(field, v) || !std::isfinite(v)) {
        throw FormatError(where + ": invalid value '" + std::string(field) +
                          "' at line " + std::to_string(lines.line_number()));
      }
      q.push_back(v);
    }
    if (!queries.empty() && q.size() != queries.front().size()) {
      throw FormatError(where + ": query dimension changes at line " +
                        std::to_string(lines.line_number()));
    }
    queries.push_back(std::move(q));
  }
  return queries;
}

void save_queries(const std::vector<std::vector<double>>& queries,
                  const std::filesystem::path& path) {
  std::string out;
  for (const auto& q : queries) {
    for (std::size_t k = 0; k < q.size(); ++k) {
      if (k > 0) out += ' ';
      detail::append_number(out, q[k]);
    }
    out += '\n';
  }
  detail::write_file(path, out);
}

}  // namespace fgd
