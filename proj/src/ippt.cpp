#include "fgd/ippt.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "fgd/error.hpp"

namespace fgd {

namespace {

double augmented_norm_sq(const VocabularyProjection& projection, WordId id) {
  double acc = 0.0;
  for (float v : projection.weights(id)) acc += static_cast<double>(v) * v;
  const double b = projection.bias(id);
  return acc + b * b;
}

}  // namespace

TransformBound compute_bound(const VocabularyProjection& projection,
                             BoundMode mode,
                             std::optional<double> explicit_value) {
  double max_sq = 0.0;
  for (std::size_t i = 0; i < projection.vocab_size(); ++i) {
    max_sq = std::max(max_sq, augmented_norm_sq(projection, static_cast<WordId>(i)));
  }
  const double max_row_norm = std::sqrt(max_sq);
  if (max_row_norm == 0.0) {
    throw InvalidArgument("degenerate projection: every word vector is zero");
  }

  TransformBound bound;
  bound.mode = mode;
  bound.max_row_norm = max_row_norm;
  if (mode == BoundMode::max_augmented_row_norm) {
    bound.U = max_row_norm;
    return bound;
  }
  if (!explicit_value || !std::isfinite(*explicit_value)) {
    throw InvalidArgument("explicit bound mode requires a finite value");
  }
  if (*explicit_value < max_row_norm) {
    throw InvalidArgument("explicit bound " + std::to_string(*explicit_value) +
                          " is below the maximum augmented row norm " +
                          std::to_string(max_row_norm));
  }
  bound.U = *explicit_value;
  return bound;
}

template <typename Scalar>
BasicTransformedPoints<Scalar> transform_points(const VocabularyProjection& projection,
                                                const TransformBound& bound) {
  if (!(bound.U > 0.0) || bound.U < bound.max_row_norm) {
    throw InvalidArgument("transform bound U is below the maximum row norm");
  }
  const std::size_t n = projection.vocab_size();
  const std::size_t d = projection.dim();
  const double u_sq = bound.u_squared();

  BasicTransformedPoints<Scalar> points;
  points.count_ = n;
  points.source_dim_ = d;
  points.bound_ = bound;
  points.data_.resize(n * (d + 2));
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = static_cast<WordId>(i);
    Scalar* z = points.data_.data() + i * (d + 2);
    const auto w = projection.weights(id);
    for (std::size_t k = 0; k < d; ++k) z[k] = static_cast<Scalar>(w[k]);
    z[d] = static_cast<Scalar>(projection.bias(id));
    double radicand = u_sq - augmented_norm_sq(projection, id);
    // A few ulps of U^2 counts as zero.
    if (std::abs(radicand) <= 8.0 * std::numeric_limits<double>::epsilon() * u_sq) {
      radicand = 0.0;
    }
    if (radicand < 0.0) {
      if (radicand < -1e-6 * u_sq) {
        throw InvalidArgument("transform bound too small for word " +
                              std::to_string(i) + " (radicand " +
                              std::to_string(radicand) + ")");
      }
      radicand = 0.0;
    }
    z[d + 1] = static_cast<Scalar>(std::sqrt(radicand));
  }
  return points;
}

template <typename Scalar>
BasicTransformedPoints<Scalar> BasicTransformedPoints<Scalar>::from_rows(
    std::vector<Scalar> data, std::size_t count, std::size_t source_dim,
    TransformBound bound, double sphere_tolerance) {
  if (count == 0 || source_dim == 0) {
    throw InvalidArgument("transformed points must be non-empty");
  }
  if (data.size() != count * (source_dim + 2)) {
    throw InvalidArgument("transformed point data has the wrong size");
  }
  if (!(bound.U > 0.0) || !std::isfinite(bound.U) || bound.U < bound.max_row_norm) {
    throw InvalidArgument("invalid transform bound");
  }
  const std::size_t dim = source_dim + 2;
  for (std::size_t i = 0; i < count; ++i) {
    double norm_sq = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double v = data[i * dim + k];
      if (!std::isfinite(v)) {
        throw InvalidArgument("non-finite coordinate in transformed point " +
                              std::to_string(i));
      }
      norm_sq += v * v;
    }
    if (data[i * dim + dim - 1] < 0) {
      throw InvalidArgument("negative lift coordinate in transformed point " +
                            std::to_string(i));
    }
    if (std::abs(std::sqrt(norm_sq) - bound.U) > sphere_tolerance * bound.U) {
      throw InvalidArgument("transformed point " + std::to_string(i) +
                            " is off the sphere of radius U");
    }
  }
  BasicTransformedPoints points;
  points.data_ = std::move(data);
  points.count_ = count;
  points.source_dim_ = source_dim;
  points.bound_ = bound;
  return points;
}

TransformedQuery transform_query(std::span<const double> h, std::size_t source_dim) {
  if (h.size() != source_dim) {
    throw DimensionError("context vector has dimension " + std::to_string(h.size()) +
                         ", index expects " + std::to_string(source_dim));
  }
  TransformedQuery q;
  q.h_tilde.resize(source_dim + 2);
  double norm_sq = 0.0;
  for (std::size_t k = 0; k < source_dim; ++k) {
    if (!std::isfinite(h[k])) {
      throw InvalidArgument("non-finite entry " + std::to_string(k) +
                            " in context vector");
    }
    q.h_tilde[k] = h[k];
    norm_sq += h[k] * h[k];
  }
  q.h_tilde[source_dim] = 1.0;
  q.h_tilde[source_dim + 1] = 0.0;
  q.h_norm_sq = norm_sq;
  return q;
}

template <typename Scalar>
double squared_distance(std::span<const Scalar> z, const TransformedQuery& q) {
  if (z.size() != q.h_tilde.size()) {
    throw DimensionError("point has dimension " + std::to_string(z.size()) +
                         ", query has " + std::to_string(q.h_tilde.size()));
  }
  double acc = 0.0;
  const double* h = q.h_tilde.data();
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double diff = static_cast<double>(z[k]) - h[k];
    acc += diff * diff;
  }
  return acc;
}

template <typename Scalar>
double squared_distance(std::span<const Scalar> a, std::span<const Scalar> b) {
  if (a.size() != b.size()) {
    throw DimensionError("point dimensions differ: " + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = static_cast<double>(a[k]) - static_cast<double>(b[k]);
    acc += diff * diff;
  }
  return acc;
}

template <typename Scalar>
double metric_rho(WordId i, WordId j, const BasicTransformedPoints<Scalar>& points) {
  if (i >= points.size() || j >= points.size()) {
    throw InvalidArgument("word id out of range");
  }
  return std::sqrt(squared_distance(points.row(i), points.row(j)));
}

template <typename Scalar>
double matching_mu(WordId i, const TransformedQuery& q,
                   const BasicTransformedPoints<Scalar>& points) {
  if (i >= points.size()) throw InvalidArgument("word id out of range");
  return std::sqrt(squared_distance(points.row(i), q));
}

#define FGD_INSTANTIATE_IPPT(S)                                                    \
  template class BasicTransformedPoints<S>;                                        \
  template BasicTransformedPoints<S> transform_points<S>(                          \
      const VocabularyProjection&, const TransformBound&);                         \
  template double squared_distance<S>(std::span<const S>, const TransformedQuery&); \
  template double squared_distance<S>(std::span<const S>, std::span<const S>);     \
  template double metric_rho<S>(WordId, WordId, const BasicTransformedPoints<S>&); \
  template double matching_mu<S>(WordId, const TransformedQuery&,                  \
                                 const BasicTransformedPoints<S>&);

FGD_INSTANTIATE_IPPT(float)
FGD_INSTANTIATE_IPPT(double)

#undef FGD_INSTANTIATE_IPPT

}  // namespace fgd
