#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fgd/error.hpp"
#include "fgd/ippt.hpp"
#include "test_util.hpp"

using namespace fgd;

namespace {

// Two words in d = 1: w = (1, -1), b = (0, 0.5).
VocabularyProjection two_words() {
  return VocabularyProjection({"x", "y"}, {1.0f, -1.0f}, {0.0f, 0.5f}, 1, true);
}

}  // namespace

TEST(Ippt, HandWorkedFixture) {
  const auto p = two_words();
  const auto bound = compute_bound(p);
  EXPECT_DOUBLE_EQ(bound.U, std::sqrt(1.25));
  EXPECT_EQ(bound.mode, BoundMode::max_augmented_row_norm);

  const auto pts = transform_points<double>(p, bound);
  ASSERT_EQ(pts.dim(), 3u);
  const std::vector<double> z1{1.0, 0.0, 0.5};
  const std::vector<double> z2{-1.0, 0.5, 0.0};
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(pts.row(0)[k], z1[k], 1e-15);
    EXPECT_NEAR(pts.row(1)[k], z2[k], 1e-15);
  }

  const std::vector<double> h{2.0};
  const auto q = transform_query(h, 1);
  EXPECT_EQ(q.h_tilde, (std::vector<double>{2.0, 1.0, 0.0}));
  EXPECT_DOUBLE_EQ(q.h_norm_sq, 4.0);
  const double d1 = squared_distance(pts.row(0), q);
  const double d2 = squared_distance(pts.row(1), q);
  EXPECT_NEAR(d1, 2.25, 1e-14);
  EXPECT_NEAR(d2, 9.25, 1e-14);
  EXPECT_NEAR(distance_to_logit(d1, bound, q.h_norm_sq), 2.0, 1e-14);
  EXPECT_NEAR(distance_to_logit(d2, bound, q.h_norm_sq), -1.5, 1e-14);
  EXPECT_NEAR(metric_rho(0, 1, pts), std::sqrt(4.5), 1e-14);
  EXPECT_NEAR(matching_mu(0, q, pts), 1.5, 1e-14);
}

TEST(Ippt, ExplicitBound) {
  const auto p = two_words();
  const auto b = compute_bound(p, BoundMode::explicit_norm, 3.0);
  EXPECT_EQ(b.U, 3.0);
  EXPECT_DOUBLE_EQ(b.max_row_norm, std::sqrt(1.25));
  EXPECT_THROW(compute_bound(p, BoundMode::explicit_norm, 1.0), InvalidArgument);
  EXPECT_THROW(compute_bound(p, BoundMode::explicit_norm), InvalidArgument);
  EXPECT_THROW(compute_bound(p, BoundMode::explicit_norm, NAN), InvalidArgument);

  const auto pts = transform_points<double>(p, b);
  for (WordId i = 0; i < 2; ++i) {
    double n2 = 0.0;
    for (double v : pts.row(i)) n2 += v * v;
    EXPECT_NEAR(std::sqrt(n2), 3.0, 1e-12);
  }
}

TEST(Ippt, AllZeroProjectionRejected) {
  VocabularyProjection p({"a", "b"}, {0.0f, 0.0f}, {}, 1, false);
  EXPECT_THROW(compute_bound(p), InvalidArgument);
}

TEST(Ippt, QueryValidation) {
  const std::vector<double> h{1.0, 2.0};
  EXPECT_THROW(transform_query(h, 3), DimensionError);
  const std::vector<double> bad{1.0, INFINITY};
  EXPECT_THROW(transform_query(bad, 2), InvalidArgument);
  const auto q = transform_query(h, 2);
  const std::vector<double> row{1.0, 2.0};
  EXPECT_THROW(squared_distance(std::span<const double>(row), q), DimensionError);
}

TEST(Ippt, SphereInvariantAndLogitRecovery) {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t vocab = 8 + trial * 13;
    const std::size_t dim = 1 + trial % 17;
    const auto p = fgd::testing::random_projection(vocab, dim, 1000 + trial);
    const auto bound = compute_bound(p);
    const auto p64 = transform_points<double>(p, bound);
    const auto p32 = transform_points<float>(p, bound);
    for (WordId i = 0; i < vocab; ++i) {
      long double n64 = 0.0L, n32 = 0.0L;
      for (double v : p64.row(i)) n64 += static_cast<long double>(v) * v;
      for (float v : p32.row(i)) n32 += static_cast<long double>(v) * v;
      EXPECT_LE(std::abs(std::sqrt(static_cast<double>(n64)) - bound.U) / bound.U, 1e-9);
      EXPECT_LE(std::abs(std::sqrt(static_cast<double>(n32)) - bound.U) / bound.U, 1e-4);
    }
    const auto h = fgd::testing::random_vector(dim, gen);
    const auto q = transform_query(h, dim);
    const auto logits = fgd::testing::direct_logits(p, h);
    for (WordId i = 0; i < vocab; ++i) {
      const auto ref = static_cast<double>(logits[i]);
      const double l64 =
          distance_to_logit(squared_distance(p64.row(i), q), bound, q.h_norm_sq);
      const double l32 =
          distance_to_logit(squared_distance(p32.row(i), q), bound, q.h_norm_sq);
      // Relative to the magnitudes that cancel in the identity.
      const double scale = std::max({1.0, bound.u_squared(), q.h_norm_sq});
      EXPECT_LE(std::abs(l64 - ref), 1e-9 * scale);
      EXPECT_LE(std::abs(l32 - ref), 1e-3);
    }
  }
}

TEST(Ippt, RankingMatchesInnerProductRanking) {
  std::mt19937_64 gen(5);
  const auto p = fgd::testing::random_projection(200, 6, 77);
  const auto pts = transform_points<double>(p, compute_bound(p));
  for (int t = 0; t < 20; ++t) {
    const auto h = fgd::testing::random_vector(6, gen);
    const auto q = transform_query(h, 6);
    const auto logits = fgd::testing::direct_logits(p, h);
    for (WordId i = 0; i + 1 < 200; ++i) {
      const double di = squared_distance(pts.row(i), q);
      const double dj = squared_distance(pts.row(i + 1), q);
      if (std::abs(static_cast<double>(logits[i] - logits[i + 1])) > 1e-9) {
        EXPECT_EQ(logits[i] > logits[i + 1], di < dj);
      }
    }
  }
}

TEST(Ippt, MetricAndLipschitz) {
  std::mt19937_64 gen(23);
  const auto p = fgd::testing::random_projection(300, 8, 4);
  const auto pts = transform_points<double>(p, compute_bound(p));
  std::uniform_int_distribution<WordId> pick(0, 299);
  for (int t = 0; t < 2000; ++t) {
    const WordId a = pick(gen), b = pick(gen), c = pick(gen);
    EXPECT_GE(metric_rho(a, b, pts) + metric_rho(b, c, pts) - metric_rho(a, c, pts), -1e-9);
    EXPECT_NEAR(metric_rho(a, b, pts), metric_rho(b, a, pts), 1e-12);
    EXPECT_EQ(metric_rho(a, a, pts), 0.0);
    const auto q = transform_query(fgd::testing::random_vector(8, gen), 8);
    EXPECT_LE(std::abs(matching_mu(a, q, pts) - matching_mu(b, q, pts)),
              metric_rho(a, b, pts) + 1e-9);
  }
}

TEST(Ippt, FromRowsValidatesSphere) {
  const TransformBound bound{1.0, BoundMode::explicit_norm, 1.0};
  const std::vector<double> good{1.0, 0.0, 0.0};
  EXPECT_NO_THROW(TransformedPoints64::from_rows(good, 1, 1, bound, 1e-9));
  const std::vector<double> off{2.0, 0.0, 0.0};
  EXPECT_THROW(TransformedPoints64::from_rows(off, 1, 1, bound, 1e-9), InvalidArgument);
  const std::vector<double> neg{0.0, 0.0, -1.0};
  EXPECT_THROW(TransformedPoints64::from_rows(neg, 1, 1, bound, 1e-9), InvalidArgument);
}
