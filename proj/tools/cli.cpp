#include "cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <chrono>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fgd/decoder.hpp"
#include "fgd/error.hpp"
#include "fgd/eval.hpp"
#include "fgd/ippt.hpp"
#include "fgd/projection.hpp"
#include "fgd/smoothing.hpp"
#include "fgd/swvg.hpp"

namespace fgd::cli {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string num(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

VocabularyProjection load_embeddings(const std::string& path, const std::string& format) {
  if (format == "text") return load_projection(path, ProjectionFormat::text);
  if (format == "bin") return load_projection(path, ProjectionFormat::binary);
  return load_projection(path);
}

void require_match(const Index& index, const VocabularyProjection& projection) {
  if (index.vocab_size() != projection.vocab_size() ||
      index.source_dim() != projection.dim()) {
    throw InvalidArgument("index (" + std::to_string(index.vocab_size()) + " words, dim " +
                          std::to_string(index.source_dim()) +
                          ") does not match embeddings (" +
                          std::to_string(projection.vocab_size()) + " words, dim " +
                          std::to_string(projection.dim()) + ")");
  }
}

std::vector<double> parse_vector(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string field;
  while (std::getline(ss, field, ',')) {
    const auto first = field.find_first_not_of(" \t");
    const auto last = field.find_last_not_of(" \t");
    if (first == std::string::npos) throw UsageError("empty entry in --vector");
    const std::string trimmed = field.substr(first, last - first + 1);
    double v = 0.0;
    const char* begin = trimmed.data();
    const char* end = begin + trimmed.size();
    if (begin != end && *begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end) {
      throw UsageError("invalid number '" + trimmed + "' in --vector");
    }
    values.push_back(v);
  }
  if (values.empty()) throw UsageError("--vector is empty");
  return values;
}

// ---------------------------------------------------------------------------

struct BuildConfig {
  std::string embeddings;
  std::string format = "auto";
  std::string freq;
  double floor = 1.0;
  std::size_t M = 16;
  std::size_t ef_construction = 200;
  std::uint64_t seed = 42;
  std::string out;
};

int cmd_build(const BuildConfig& cfg, std::ostream& out) {
  SwvgParams params;
  params.M = cfg.M;
  params.ef_construction = cfg.ef_construction;
  params.seed = cfg.seed;
  params.validate();

  const auto start = std::chrono::steady_clock::now();
  const auto projection = load_embeddings(cfg.embeddings, cfg.format);
  if (!cfg.freq.empty()) load_frequencies(cfg.freq, projection, cfg.floor);
  const auto index = build_index<float>(projection, params);
  save_index(index, cfg.out);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::map<int, std::size_t> histogram;
  for (auto level : index.graph.levels()) ++histogram[level];
  out << "index=" << cfg.out << '\n'
      << "vocab_size=" << projection.vocab_size() << '\n'
      << "dim=" << projection.dim() << '\n'
      << "U=" << num(index.bound().U) << '\n'
      << "max_row_norm=" << num(index.bound().max_row_norm) << '\n'
      << "M=" << params.M << '\n'
      << "M0=" << params.max_neighbors0() << '\n'
      << "ef_construction=" << params.ef_construction << '\n'
      << "seed=" << params.seed << '\n'
      << "levels=";
  bool first = true;
  for (const auto& [level, count] : histogram) {
    out << (first ? "" : ",") << level << ':' << count;
    first = false;
  }
  out << '\n' << "build_seconds=" << num(seconds) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct QueryConfig {
  std::string index;
  std::string embeddings;
  std::string format = "auto";
  std::string vector;
  std::string queries;
  std::size_t k = 10;
  std::optional<std::size_t> ef_search;
  std::string mode = "graph";
  std::string smooth = "none";
  std::optional<double> epsilon_frac;
  std::optional<double> epsilon;
  std::string freq;
  double floor = 1.0;
};

int cmd_query(const QueryConfig& cfg, std::ostream& out) {
  std::vector<std::vector<double>> queries;
  if (!cfg.vector.empty()) {
    queries.push_back(parse_vector(cfg.vector));
  }
  const bool smoothing = cfg.smooth != "none";
  if (smoothing && cfg.smooth != "consistent" && cfg.smooth != "laplacian" &&
      cfg.smooth != "wta") {
    throw InvalidArgument("unknown smoothing mode '" + cfg.smooth + "'");
  }
  if (cfg.epsilon_frac && cfg.epsilon) {
    throw UsageError("--epsilon and --epsilon-frac are mutually exclusive");
  }
  if ((cfg.smooth == "consistent" || cfg.smooth == "laplacian") && cfg.freq.empty()) {
    throw InvalidArgument("frequency table required for --smooth " + cfg.smooth);
  }
  if (cfg.epsilon_frac && cfg.smooth != "consistent") {
    throw UsageError("--epsilon-frac applies only to --smooth consistent");
  }

  const auto index = load_index(cfg.index);
  const auto projection = load_embeddings(cfg.embeddings, cfg.format);
  require_match(index, projection);
  if (!cfg.queries.empty()) queries = load_queries(cfg.queries);
  if (queries.empty()) throw InvalidArgument("no queries");

  std::optional<FrequencyTable> freq;
  if (!cfg.freq.empty()) freq = load_frequencies(cfg.freq, projection, cfg.floor);

  const SearchMode mode = cfg.mode == "flat" ? SearchMode::flat : SearchMode::graph;
  const std::size_t ef = cfg.ef_search.value_or(std::max<std::size_t>(64, cfg.k));
  const auto results = batch_decode(index, queries, cfg.k, ef, mode);

  out << "rank\ttoken\tlogit\tprob" << (smoothing ? "\tsmoothed_prob" : "")
      << "\tdist_evals\n";
  for (std::size_t qi = 0; qi < results.size(); ++qi) {
    const auto& r = results[qi];
    std::optional<SmoothedDistribution> smoothed;
    if (cfg.smooth == "consistent") {
      smoothed = cfg.epsilon
                     ? smooth_consistent(r.ids, r.probs, *freq, *cfg.epsilon)
                     : smooth_consistent(r.ids, r.probs, *freq,
                                         EpsilonPolicy{cfg.epsilon_frac.value_or(0.5)});
    } else if (cfg.smooth == "laplacian") {
      std::vector<double> dense(projection.vocab_size(), 0.0);
      for (std::size_t i = 0; i < r.ids.size(); ++i) dense[r.ids[i]] = r.probs[i];
      smoothed = smooth_laplacian(dense, *freq, cfg.epsilon.value_or(0.1));
    } else if (cfg.smooth == "wta") {
      const std::size_t tail = projection.vocab_size() - r.ids.size();
      const double eps = cfg.epsilon.value_or(
          tail > 0 ? 0.01 / static_cast<double>(tail) : 0.01);
      smoothed = smooth_winners_take_all(r.ids, r.probs, projection.vocab_size(), eps);
    }

    out << "# query " << qi;
    if (smoothed) {
      double tail_mass = 1.0;
      for (double p : smoothed->topk_probs()) tail_mass -= p;
      out << " smoothing=" << cfg.smooth << " epsilon=" << num(smoothed->epsilon())
          << " tail_mass=" << num(tail_mass);
    }
    out << '\n';
    for (std::size_t i = 0; i < r.ids.size(); ++i) {
      out << (i + 1) << '\t' << projection.token(r.ids[i]) << '\t' << num(r.logits[i])
          << '\t' << num(r.probs[i]);
      if (smoothed) out << '\t' << num(smoothed->probability(r.ids[i]));
      out << '\t' << r.distance_evals << '\n';
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalConfig {
  std::string index;
  std::string embeddings;
  std::string format = "auto";
  std::string queries;
  std::size_t k = 10;
  std::vector<std::size_t> ef_search{64};
  std::size_t threads = 1;
  std::size_t warmup = 10;
  std::size_t measure = 100;
  std::string out;
};

int cmd_eval(const EvalConfig& cfg, bool bench, std::ostream& out) {
  const auto index = load_index(cfg.index);
  const auto projection = load_embeddings(cfg.embeddings, cfg.format);
  require_match(index, projection);
  const auto queries = load_queries(cfg.queries);
  if (queries.empty()) throw InvalidArgument("no queries in '" + cfg.queries + "'");

  EvalOptions options;
  options.threads = cfg.threads;
  options.warmup = bench ? cfg.warmup : 0;
  options.measured = bench ? cfg.measure : 0;

  std::string records;
  for (std::size_t ef : cfg.ef_search) {
    const auto report = run_eval(index, projection, queries, cfg.k, ef, options);
    out << "[ef_search=" << ef << "]\n" << report.to_text(bench);
    records += report.to_jsonl();
  }
  if (!cfg.out.empty()) {
    std::ofstream file(cfg.out, std::ios::binary | std::ios::trunc);
    file << records;
    file.flush();
    if (!file) throw IoError("cannot write '" + cfg.out + "'");
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SynthConfig {
  std::size_t vocab = 1000;
  std::size_t dim = 32;
  std::string dist = "gaussian";
  std::uint64_t seed = 42;
  std::size_t queries = 1000;
  std::string format = "text";
  std::string out_prefix;
};

int cmd_synth(const SynthConfig& cfg, std::ostream& out) {
  const auto data = synth_dataset(cfg.vocab, cfg.dim,
                                  cfg.dist == "zipf" ? SynthDistribution::zipf_scaled_gaussian
                                                     : SynthDistribution::gaussian,
                                  cfg.seed, cfg.queries);
  const bool binary = cfg.format == "bin";
  const std::string vec_path = cfg.out_prefix + (binary ? ".bin" : ".vec");
  save_projection(data.projection, vec_path,
                  binary ? ProjectionFormat::binary : ProjectionFormat::text);
  save_frequencies(data.frequencies, data.projection, cfg.out_prefix + ".freq");
  save_queries(data.queries, cfg.out_prefix + ".queries");
  out << "embeddings=" << vec_path << '\n'
      << "frequencies=" << cfg.out_prefix << ".freq\n"
      << "queries=" << cfg.out_prefix << ".queries\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fast top-K vocabulary projection over a small-world word graph"};
  app.name("fgd");
  app.require_subcommand(1);

  const auto format_check = CLI::IsMember({"auto", "text", "bin"});

  BuildConfig build;
  auto* build_cmd = app.add_subcommand("build", "Build an index from a projection file");
  build_cmd->add_option("--embeddings", build.embeddings, "Projection file")->required();
  build_cmd->add_option("--format", build.format, "auto|text|bin")->check(format_check);
  build_cmd->add_option("--freq", build.freq, "Frequency file to validate");
  build_cmd->add_option("--floor", build.floor, "Count for unseen tokens")
      ->check(CLI::NonNegativeNumber);
  build_cmd->add_option("--M", build.M, "Max neighbors per node")->check(CLI::Range(2, 65535));
  build_cmd->add_option("--ef-construction", build.ef_construction, "Build candidate width")
      ->check(CLI::PositiveNumber);
  build_cmd->add_option("--seed", build.seed, "Level RNG seed");
  build_cmd->add_option("--out", build.out, "Index output path")->required();

  QueryConfig query;
  auto* query_cmd = app.add_subcommand("query", "Decode context vectors");
  query_cmd->add_option("--index", query.index)->required();
  query_cmd->add_option("--embeddings", query.embeddings)->required();
  query_cmd->add_option("--format", query.format)->check(format_check);
  auto* vec_opt = query_cmd->add_option("--vector", query.vector, "Comma-separated vector");
  auto* queries_opt = query_cmd->add_option("--queries", query.queries, "Query file");
  vec_opt->excludes(queries_opt);
  query_cmd->add_option("--k", query.k)->check(CLI::PositiveNumber);
  query_cmd->add_option("--ef-search", query.ef_search)->check(CLI::PositiveNumber);
  query_cmd->add_option("--mode", query.mode)->check(CLI::IsMember({"graph", "flat"}));
  query_cmd->add_option("--smooth", query.smooth, "none|consistent|laplacian|wta");
  query_cmd->add_option("--epsilon-frac", query.epsilon_frac, "epsilon = frac * min(y)");
  query_cmd->add_option("--epsilon", query.epsilon, "Explicit epsilon");
  query_cmd->add_option("--freq", query.freq);
  query_cmd->add_option("--floor", query.floor)->check(CLI::NonNegativeNumber);

  EvalConfig eval;
  EvalConfig bench;
  auto add_eval_options = [&](CLI::App* cmd, EvalConfig& cfg, bool with_timing) {
    cmd->add_option("--index", cfg.index)->required();
    cmd->add_option("--embeddings", cfg.embeddings)->required();
    cmd->add_option("--format", cfg.format)->check(format_check);
    cmd->add_option("--queries", cfg.queries)->required();
    cmd->add_option("--k", cfg.k)->check(CLI::PositiveNumber);
    cmd->add_option("--ef-search", cfg.ef_search, "Comma-separated list")
        ->delimiter(',')
        ->check(CLI::PositiveNumber);
    cmd->add_option("--threads", cfg.threads)->check(CLI::PositiveNumber);
    cmd->add_option("--out", cfg.out, "Per-query JSONL records");
    if (with_timing) {
      cmd->add_option("--warmup", cfg.warmup)->check(CLI::NonNegativeNumber);
      cmd->add_option("--measure", cfg.measure)->check(CLI::PositiveNumber);
    }
  };
  auto* eval_cmd = app.add_subcommand("eval", "Measure graph quality against the oracle");
  add_eval_options(eval_cmd, eval, false);
  auto* bench_cmd = app.add_subcommand("bench", "Quality plus latency, graph vs flat");
  add_eval_options(bench_cmd, bench, true);

  SynthConfig synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset");
  synth_cmd->add_option("--vocab", synth.vocab)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--dim", synth.dim)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--dist", synth.dist)->check(CLI::IsMember({"gaussian", "zipf"}));
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->add_option("--queries", synth.queries)->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--format", synth.format)->check(CLI::IsMember({"text", "bin"}));
  synth_cmd->add_option("--out-prefix", synth.out_prefix)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (build_cmd->parsed()) return cmd_build(build, out);
    if (query_cmd->parsed()) return cmd_query(query, out);
    if (eval_cmd->parsed()) return cmd_eval(eval, false, out);
    if (bench_cmd->parsed()) return cmd_eval(bench, true, out);
    if (synth_cmd->parsed()) return cmd_synth(synth, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace fgd::cli
