#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "fgd/decoder.hpp"
#include "fgd/error.hpp"
#include "fgd/eval.hpp"
#include "test_util.hpp"

using namespace fgd;

TEST(Softmax, StableAndNormalized) {
  const std::vector<double> big{1000.0, 999.0, 998.0};
  const auto p = softmax(big);
  EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-15);
  EXPECT_NEAR(p[0] / p[1], std::exp(1.0), 1e-12);
  const std::vector<double> one{-5.0};
  EXPECT_EQ(softmax(one), std::vector<double>{1.0});
}

TEST(Decoder, HandWorkedFixture) {
  VocabularyProjection proj({"x", "y"}, {1.0f, -1.0f}, {0.0f, 0.5f}, 1, true);
  const auto index = build_index<double>(proj, SwvgParams{});
  const std::vector<double> h{2.0};
  for (auto mode : {SearchMode::flat, SearchMode::graph}) {
    const auto r = decode_topk(index, h, 2, 2, mode);
    ASSERT_EQ(r.ids, (std::vector<WordId>{0, 1}));
    EXPECT_NEAR(r.logits[0], 2.0, 1e-12);
    EXPECT_NEAR(r.logits[1], -1.5, 1e-12);
    EXPECT_NEAR(r.probs[0], 0.970688, 1e-6);
    EXPECT_NEAR(r.probs[1], 0.029312, 1e-6);
    EXPECT_EQ(r.k, 2u);
  }
  EXPECT_TRUE(decode_topk(index, h, 1, 1, SearchMode::flat).exact);
}

TEST(Decoder, TiesBreakBySmallerId) {
  // Identical rows tie exactly.
  VocabularyProjection proj({"a", "b", "c", "d"}, {0.5f, 1.0f, 1.0f, 1.0f}, {}, 1, false);
  const auto index = build_index<double>(proj, SwvgParams{});
  const std::vector<double> h{1.0};
  const auto r = decode_topk(index, h, 3, 4, SearchMode::flat);
  EXPECT_EQ(r.ids, (std::vector<WordId>{1, 2, 3}));
  const auto g = decode_topk(index, h, 3, 4, SearchMode::graph);
  EXPECT_EQ(g.ids, r.ids);
}

TEST(Decoder, FlatMatchesReferenceRanking) {
  std::mt19937_64 gen(1234);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t vocab = 16 + (trial * 37) % 300;
    const std::size_t dim = 2 + trial % 20;
    const auto proj = fgd::testing::random_projection(vocab, dim, trial + 50);
    const auto index = build_index<double>(proj, SwvgParams{});
    const auto h = fgd::testing::random_vector(dim, gen);
    const auto ref = fgd::testing::reference_ranking(proj, h);
    const auto logits = fgd::testing::direct_logits(proj, h);
    for (std::size_t K : {std::size_t{1}, std::size_t{5}, vocab}) {
      const auto r = decode_topk(index, h, K, K, SearchMode::flat);
      ASSERT_EQ(r.ids, std::vector<WordId>(ref.begin(), ref.begin() + K));
      for (std::size_t i = 0; i < K; ++i) {
        const auto want = static_cast<double>(logits[r.ids[i]]);
        EXPECT_LE(std::abs(r.logits[i] - want), 1e-9 * std::max(1.0, std::abs(want)));
      }
    }
  }
}

TEST(Decoder, GraphAgreesWithOracleAtFullWidth) {
  std::mt19937_64 gen(8);
  const auto proj = fgd::testing::random_projection(200, 6, 70);
  const auto index = build_index<float>(proj, SwvgParams{});
  for (int t = 0; t < 30; ++t) {
    const auto h = fgd::testing::random_vector(6, gen);
    const auto r = decode_topk(index, h, 10, 200, SearchMode::graph);
    const auto ref = fgd::testing::reference_ranking(proj, h);
    EXPECT_EQ(r.ids, std::vector<WordId>(ref.begin(), ref.begin() + 10));
    EXPECT_FALSE(r.exact);
  }
}

TEST(Decoder, ArgumentErrors) {
  const auto proj = fgd::testing::random_projection(20, 3, 1);
  const auto index = build_index<float>(proj, SwvgParams{});
  const std::vector<double> h{1, 2, 3};
  EXPECT_THROW(decode_topk(index, h, 0, 10, SearchMode::graph), InvalidArgument);
  EXPECT_THROW(decode_topk(index, h, 21, 30, SearchMode::flat), InvalidArgument);
  const std::vector<double> h2{1, 2};
  EXPECT_THROW(decode_topk(index, h2, 1, 10, SearchMode::graph), DimensionError);
}

TEST(Decoder, BatchNamesBadQuery) {
  const auto proj = fgd::testing::random_projection(20, 3, 1);
  const auto index = build_index<float>(proj, SwvgParams{});
  const std::vector<std::vector<double>> queries{{1, 2, 3}, {1, 2, 3}, {1, 2}};
  try {
    batch_decode(index, queries, 3, 10, SearchMode::graph);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("query 2"), std::string::npos) << e.what();
  }
  const std::vector<std::vector<double>> ok{{1, 2, 3}, {-1, 0, 1}};
  const auto rs = batch_decode(index, ok, 3, 10, SearchMode::graph);
  ASSERT_EQ(rs.size(), 2u);
  EXPECT_EQ(rs[1].ids, decode_topk(index, ok[1], 3, 10, SearchMode::graph).ids);
}

TEST(Oracle, MatchesReferenceAndPrecision) {
  std::mt19937_64 gen(3);
  const auto proj = fgd::testing::random_projection(128, 5, 14);
  const auto h = fgd::testing::random_vector(5, gen);
  const auto o = oracle_topk(proj, h, 7);
  const auto ref = fgd::testing::reference_ranking(proj, h);
  EXPECT_EQ(o.ids, std::vector<WordId>(ref.begin(), ref.begin() + 7));
  EXPECT_EQ(precision_at_k(o, o), 1.0);
  auto partial = o;
  partial.ids[0] = ref[100];
  EXPECT_NEAR(precision_at_k(partial, o), 6.0 / 7.0, 1e-15);
  EXPECT_THROW(oracle_topk(proj, h, 0), InvalidArgument);
  EXPECT_THROW(precision_at_k(oracle_topk(proj, h, 3), o), InvalidArgument);
}
