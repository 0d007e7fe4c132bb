#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include <json.hpp>

#include "fgd/error.hpp"
#include "fgd/eval.hpp"
#include "test_util.hpp"

using namespace fgd;

TEST(Synth, DeterministicAndShaped) {
  const auto a = synth_dataset(300, 8, SynthDistribution::gaussian, 42, 20);
  const auto b = synth_dataset(300, 8, SynthDistribution::gaussian, 42, 20);
  const auto c = synth_dataset(300, 8, SynthDistribution::gaussian, 43, 20);
  EXPECT_EQ(a.projection, b.projection);
  EXPECT_EQ(a.queries, b.queries);
  EXPECT_FALSE(a.projection == c.projection);
  EXPECT_EQ(a.projection.vocab_size(), 300u);
  EXPECT_EQ(a.projection.dim(), 8u);
  EXPECT_TRUE(a.projection.has_bias());
  ASSERT_EQ(a.queries.size(), 20u);
  EXPECT_EQ(a.queries[0].size(), 8u);
  EXPECT_TRUE(a.frequencies.all_positive());

  double mean = 0.0, var = 0.0;
  const auto w = a.projection.weight_data();
  for (float v : w) mean += v;
  mean /= static_cast<double>(w.size());
  for (float v : w) var += (v - mean) * (v - mean);
  var /= static_cast<double>(w.size());
  EXPECT_NEAR(mean, 0.0, 0.1);
  EXPECT_NEAR(var, 1.0, 0.1);
}

TEST(Synth, ZipfCountsAreMonotone) {
  const auto z = synth_dataset(500, 4, SynthDistribution::zipf_scaled_gaussian, 7, 0);
  const auto counts = z.frequencies.counts();
  for (std::size_t i = 1; i < counts.size(); ++i) EXPECT_LE(counts[i], counts[i - 1]);
  EXPECT_GT(counts.front(), counts.back());
  EXPECT_TRUE(z.queries.empty());
  EXPECT_THROW(synth_dataset(0, 4, SynthDistribution::gaussian, 1), InvalidArgument);
}

TEST(Queries, RoundTripAndErrors) {
  fgd::testing::TempDir dir;
  const std::vector<std::vector<double>> q{{1.5, -2.0, 0.1}, {0.0, 3.25, 1e-7}};
  save_queries(q, dir / "q.txt");
  EXPECT_EQ(load_queries(dir / "q.txt"), q);
  fgd::testing::write_text(dir / "bad", "1 2\n3\n");
  EXPECT_THROW(load_queries(dir / "bad"), FormatError);
  fgd::testing::write_text(dir / "nan", "1 x\n");
  EXPECT_THROW(load_queries(dir / "nan"), FormatError);
  fgd::testing::write_text(dir / "empty", "\n\n");
  EXPECT_TRUE(load_queries(dir / "empty").empty());
}

TEST(Eval, MetricsAreDeterministicAcrossRunsAndThreads) {
  const auto data = synth_dataset(2000, 16, SynthDistribution::gaussian, 42, 60);
  const auto index = build_index<float>(data.projection, SwvgParams{});
  EvalOptions options;
  options.measured = 0;
  const auto a = run_eval(index, data.projection, data.queries, 10, 64, options);
  const auto b = run_eval(index, data.projection, data.queries, 10, 64, options);
  options.threads = 4;
  const auto c = run_eval(index, data.projection, data.queries, 10, 64, options);
  EXPECT_EQ(a.to_text(false), b.to_text(false));
  EXPECT_EQ(a.to_text(false), c.to_text(false));
  EXPECT_EQ(a.to_jsonl(), c.to_jsonl());
  EXPECT_GT(a.mean_precision, 0.5);
  EXPECT_LE(a.min_precision, a.mean_precision);
  EXPECT_EQ(a.records.size(), 60u);
  EXPECT_EQ(a.to_text(false).find("latency"), std::string::npos);
}

TEST(Eval, JsonlRecordsParse) {
  const auto data = synth_dataset(200, 4, SynthDistribution::gaussian, 1, 5);
  const auto index = build_index<float>(data.projection, SwvgParams{});
  EvalOptions options;
  options.warmup = 1;
  options.measured = 3;
  const auto r = run_eval(index, data.projection, data.queries, 5, 200, options);
  EXPECT_EQ(r.mean_precision, 1.0);
  EXPECT_EQ(r.graph_latency.samples, 3u);
  EXPECT_EQ(r.flat_latency.samples, 3u);
  EXPECT_NE(r.to_text(true).find("latency_flat_p50_us="), std::string::npos);
  std::size_t lines = 0;
  std::istringstream in(r.to_jsonl());
  std::string line;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("query").get<std::size_t>(), lines);
    EXPECT_EQ(j.at("ids").size(), 5u);
    ++lines;
  }
  EXPECT_EQ(lines, 5u);
}

TEST(Eval, InputErrors) {
  const auto data = synth_dataset(100, 4, SynthDistribution::gaussian, 1, 3);
  const auto index = build_index<float>(data.projection, SwvgParams{});
  EXPECT_THROW(run_eval(index, data.projection, {}, 5, 10), InvalidArgument);
  EXPECT_THROW(run_eval(index, data.projection, data.queries, 0, 10), InvalidArgument);
  EXPECT_THROW(run_eval(index, data.projection, data.queries, 10, 5), InvalidArgument);
  EXPECT_THROW(run_eval(index, data.projection, {{1.0, 2.0}}, 5, 10), DimensionError);
  const auto other = synth_dataset(101, 4, SynthDistribution::gaussian, 1, 0);
  EXPECT_THROW(run_eval(index, other.projection, data.queries, 5, 10), InvalidArgument);
}

TEST(Eval, SubLinearDistanceEvaluations) {
  const auto data = synth_dataset(16384, 16, SynthDistribution::gaussian, 42, 50);
  const auto index = build_index<float>(data.projection, SwvgParams{});
  EvalOptions options;
  options.measured = 0;
  const auto r = run_eval(index, data.projection, data.queries, 10, 64, options);
  RecordProperty("mean_distance_evals", std::to_string(r.mean_distance_evals));
  EXPECT_LT(r.mean_distance_evals, 0.25 * 16384);
}
