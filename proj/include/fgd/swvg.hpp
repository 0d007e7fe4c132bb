#pragma once

// Small-world vocabulary graph: a layered navigable small-world index over
// the lifted word vectors, searched with greedy best-first traversal.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fgd/ippt.hpp"
#include "fgd/projection.hpp"

namespace fgd {

struct SwvgParams {
  std::size_t M = 16;                     ///< max neighbors per node, layers >= 1
  std::optional<std::size_t> M0;          ///< max neighbors at layer 0 (2 M)
  std::size_t ef_construction = 200;
  std::optional<double> level_mult;       ///< 1 / ln(M)
  std::uint64_t seed = 42;

  std::size_t max_neighbors0() const noexcept { return M0.value_or(2 * M); }
  double effective_level_mult() const;

  /// Throws InvalidArgument unless M >= 2, M0 >= M, ef_construction >= M and
  /// level_mult > 0.
  void validate() const;
};

/// Adjacency for every layer. Layer l holds lists only for nodes whose level
/// is >= l; all other lists at that layer are empty.
class SwvgGraph {
 public:
  SwvgGraph() = default;

  /// Assembles a graph from raw parts (loader and tests); runs validate().
  SwvgGraph(std::vector<std::uint8_t> levels,
            std::vector<std::vector<std::vector<WordId>>> adjacency);

  std::size_t node_count() const noexcept { return levels_.size(); }
  int max_level() const noexcept { return static_cast<int>(adjacency_.size()) - 1; }
  WordId entry_point() const noexcept { return entry_; }
  std::uint8_t level(WordId id) const noexcept { return levels_[id]; }
  std::span<const std::uint8_t> levels() const noexcept { return levels_; }

  std::span<const WordId> neighbors(WordId id, int layer) const noexcept {
    return adjacency_[static_cast<std::size_t>(layer)][id];
  }

  /// Largest adjacency list at a layer.
  std::size_t max_degree(int layer) const;

  /// Every node reachable from the entry point and able to reach it back,
  /// following directed layer-0 edges.
  bool layer0_strongly_connected() const;

  /// Checks structural invariants: ids in range, no self loops, no duplicate
  /// neighbors, neighbors present on the layer, entry point on the top layer,
  /// layer 0 strongly connected. Throws FormatError on the first violation.
  void validate() const;

  friend bool operator==(const SwvgGraph&, const SwvgGraph&) = default;

 private:
  template <typename Scalar>
  friend class GraphBuilder;

  void set_entry_from_levels();

  std::vector<std::uint8_t> levels_;
  std::vector<std::vector<std::vector<WordId>>> adjacency_;
  WordId entry_ = 0;
};

/// Ids ascending by (squared distance, id).
struct SearchResult {
  std::vector<WordId> ids;
  std::vector<double> dists_sq;
  std::size_t distance_evals = 0;
};

/// Per-query visited set. Reusing one across queries on the same thread
/// avoids an O(|V|) clear per query.
class SearchScratch {
 public:
  explicit SearchScratch(std::size_t node_count = 0) : marks_(node_count, 0) {}

  void begin(std::size_t node_count);
  bool visit(WordId id) noexcept {
    if (marks_[id] == epoch_) return false;
    marks_[id] = epoch_;
    return true;
  }

 private:
  std::vector<std::uint32_t> marks_;
  std::uint32_t epoch_ = 0;
};

/// Builds the graph: level of node i is floor(-ln(u_i) * level_mult) with u_i
/// drawn from SplitMix64(seed) in id order, nodes inserted in id order,
/// neighbors chosen by the diversity heuristic. Layer 0 is then repaired to
/// be strongly connected. Deterministic for fixed (points, params).
template <typename Scalar>
SwvgGraph build_graph(const BasicTransformedPoints<Scalar>& points,
                      const SwvgParams& params);

/// Best-first search on one layer starting at `entry`, returning up to `ef`
/// nearest nodes found.
template <typename Scalar>
SearchResult search_layer(const SwvgGraph& graph,
                          const BasicTransformedPoints<Scalar>& points,
                          const TransformedQuery& q, WordId entry, std::size_t ef,
                          int layer, SearchScratch* scratch = nullptr);

/// Greedy descent through the upper layers with ef = 1, then a layer-0
/// search with ef_search, truncated to K.
template <typename Scalar>
SearchResult search_topk(const SwvgGraph& graph,
                         const BasicTransformedPoints<Scalar>& points,
                         const TransformedQuery& q, std::size_t K,
                         std::size_t ef_search, SearchScratch* scratch = nullptr);

/// Exhaustive scan; distance_evals == |V|.
template <typename Scalar>
SearchResult flat_search(const BasicTransformedPoints<Scalar>& points,
                         const TransformedQuery& q, std::size_t K);

/// Lifted points plus the graph over them.
template <typename Scalar>
struct BasicIndex {
  BasicTransformedPoints<Scalar> points;
  SwvgGraph graph;

  const TransformBound& bound() const noexcept { return points.bound(); }
  std::size_t vocab_size() const noexcept { return points.size(); }
  std::size_t source_dim() const noexcept { return points.source_dim(); }
};

using Index = BasicIndex<float>;
using Index64 = BasicIndex<double>;

/// compute_bound -> transform_points -> build_graph.
template <typename Scalar>
BasicIndex<Scalar> build_index(const VocabularyProjection& projection,
                               const SwvgParams& params,
                               BoundMode mode = BoundMode::max_augmented_row_norm,
                               std::optional<double> explicit_bound = std::nullopt);

/**
 * Index file, little-endian:
 *   "FGDI", u32 version = 1,
 *   u8 bound mode, f64 U, f64 max_row_norm,
 *   u64 vocab, u32 dim_plus_2, f32 point data row-major,
 *   u8 level per node,
 *   for each layer 0..max_level, for each node with level >= layer in id
 *   order: u16 count, u32 ids[count],
 *   u32 CRC-32 of all preceding bytes.
 * The entry point is the smallest id at the maximum level.
 */
void save_index(const Index& index, const std::filesystem::path& path);
Index load_index(const std::filesystem::path& path);

/// The serialized bytes save_index would write.
std::string serialize_index(const Index& index);
Index deserialize_index(std::string_view bytes, const std::string& where);

}  // namespace fgd
