#pragma once

// Inner-product preserving transformation.
//
// Each word (w_i, b_i) is lifted to z_i = [w_i; b_i; sqrt(U^2 - |w_i|^2 - b_i^2)]
// and each context vector h to q = [h; 1; 0]. All z_i lie on the sphere of
// radius U, and
//
//   |z_i - q|^2 = U^2 + |h|^2 + 1 - 2 (w_i^T h + b_i)
//
// so ascending distance is exactly descending logit, and a distance converts
// back to its logit in O(1).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fgd/projection.hpp"

namespace fgd {

enum class BoundMode : std::uint8_t {
  max_augmented_row_norm = 0,
  explicit_norm = 1,
};

struct TransformBound {
  double U = 0.0;
  BoundMode mode = BoundMode::max_augmented_row_norm;
  /// max_i |[w_i; b_i]|, kept so the bound can be re-validated.
  double max_row_norm = 0.0;

  double u_squared() const noexcept { return U * U; }

  friend bool operator==(const TransformBound&, const TransformBound&) = default;
};

/// Default mode picks U = max_i |[w_i; b_i]|, the smallest valid bound.
/// Throws on an all-zero projection, and on an explicit value below the
/// maximum row norm.
TransformBound compute_bound(const VocabularyProjection& projection,
                             BoundMode mode = BoundMode::max_augmented_row_norm,
                             std::optional<double> explicit_value = std::nullopt);

/// Lifted word vectors, |V| rows of d + 2 coordinates. `Scalar` is the storage
/// type: float for the on-disk index, double for the verification path.
/// Distances are accumulated at 64-bit for both.
template <typename Scalar>
class BasicTransformedPoints {
 public:
  BasicTransformedPoints() = default;

  /// Adopts already-lifted rows (used by the index loader). Checks shape,
  /// finiteness, non-negative last coordinate and |z_i| == U within
  /// `sphere_tolerance` relative.
  static BasicTransformedPoints from_rows(std::vector<Scalar> data,
                                          std::size_t count,
                                          std::size_t source_dim,
                                          TransformBound bound,
                                          double sphere_tolerance);

  std::size_t size() const noexcept { return count_; }
  std::size_t source_dim() const noexcept { return source_dim_; }
  std::size_t dim() const noexcept { return source_dim_ + 2; }
  const TransformBound& bound() const noexcept { return bound_; }

  std::span<const Scalar> row(WordId id) const noexcept {
    return {data_.data() + static_cast<std::size_t>(id) * dim(), dim()};
  }
  std::span<const Scalar> data() const noexcept { return data_; }

 private:
  template <typename S>
  friend BasicTransformedPoints<S> transform_points(const VocabularyProjection&,
                                                    const TransformBound&);

  std::vector<Scalar> data_;
  std::size_t count_ = 0;
  std::size_t source_dim_ = 0;
  TransformBound bound_;
};

using TransformedPoints = BasicTransformedPoints<float>;
using TransformedPoints64 = BasicTransformedPoints<double>;

/// Lifts every word. A radicand U^2 - |w_i|^2 - b_i^2 in [-1e-6 U^2, 0) is
/// rounding noise and clamps to 0; anything lower throws.
template <typename Scalar>
BasicTransformedPoints<Scalar> transform_points(const VocabularyProjection& projection,
                                                const TransformBound& bound);

struct TransformedQuery {
  std::vector<double> h_tilde;  ///< [h; 1; 0]
  double h_norm_sq = 0.0;

  std::size_t source_dim() const noexcept { return h_tilde.size() - 2; }
};

TransformedQuery transform_query(std::span<const double> h, std::size_t source_dim);

/// |z - q|^2. Throws DimensionError when z does not have d + 2 coordinates.
template <typename Scalar>
double squared_distance(std::span<const Scalar> z, const TransformedQuery& q);

/// |a - b|^2 between two lifted rows.
template <typename Scalar>
double squared_distance(std::span<const Scalar> a, std::span<const Scalar> b);

/// (U^2 + |h|^2 + 1 - dist_sq) / 2, i.e. w_i^T h + b_i.
inline double distance_to_logit(double dist_sq, const TransformBound& bound,
                                double h_norm_sq) noexcept {
  return 0.5 * (bound.u_squared() + h_norm_sq + 1.0 - dist_sq);
}

/// The metric rho(i, j) = |z_i - z_j|.
template <typename Scalar>
double metric_rho(WordId i, WordId j, const BasicTransformedPoints<Scalar>& points);

/// The matching function mu_h(i) = |z_i - q|.
template <typename Scalar>
double matching_mu(WordId i, const TransformedQuery& q,
                   const BasicTransformedPoints<Scalar>& points);

}  // namespace fgd
