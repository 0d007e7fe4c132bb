#include "fgd/swvg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fgd/error.hpp"
#include "fgd/rng.hpp"

namespace fgd {

namespace {

struct Candidate {
  double dist;
  WordId id;
};

// Total order used everywhere: distance, then smaller id.
inline bool closer(const Candidate& a, const Candidate& b) noexcept {
  return a.dist < b.dist || (a.dist == b.dist && a.id < b.id);
}

struct FartherFirst {
  bool operator()(const Candidate& a, const Candidate& b) const noexcept {
    return closer(b, a);
  }
};

struct CloserFirst {
  bool operator()(const Candidate& a, const Candidate& b) const noexcept {
    return closer(a, b);
  }
};

using Layer = std::vector<std::vector<WordId>>;

// Best-first traversal of one layer. Returns up to ef nodes sorted closest
// first. `dist` maps a node id to its squared distance from the target and
// `neighbors_of` maps it to its adjacency list on the layer.
template <typename NeighborFn, typename DistFn>
std::vector<Candidate> best_first(NeighborFn&& neighbors_of, DistFn&& dist,
                                  WordId entry, std::size_t ef,
                                  SearchScratch& scratch, std::size_t& evals) {
  std::vector<Candidate> frontier;  // min-heap
  std::vector<Candidate> found;     // max-heap, at most ef entries
  frontier.reserve(ef * 2);
  found.reserve(ef + 1);

  scratch.visit(entry);
  const Candidate start{dist(entry), entry};
  ++evals;
  frontier.push_back(start);
  found.push_back(start);

  while (!frontier.empty()) {
    std::pop_heap(frontier.begin(), frontier.end(), FartherFirst{});
    const Candidate current = frontier.back();
    frontier.pop_back();
    if (closer(found.front(), current)) break;

    for (WordId next : neighbors_of(current.id)) {
      if (!scratch.visit(next)) continue;
      const Candidate cand{dist(next), next};
      ++evals;
      if (found.size() < ef || closer(cand, found.front())) {
        frontier.push_back(cand);
        std::push_heap(frontier.begin(), frontier.end(), FartherFirst{});
        found.push_back(cand);
        std::push_heap(found.begin(), found.end(), CloserFirst{});
        if (found.size() > ef) {
          std::pop_heap(found.begin(), found.end(), CloserFirst{});
          found.pop_back();
        }
      }
    }
  }
  std::sort(found.begin(), found.end(), closer);
  return found;
}

SearchResult to_result(const std::vector<Candidate>& found, std::size_t limit,
                       std::size_t evals) {
  SearchResult out;
  const std::size_t n = std::min(limit, found.size());
  out.ids.reserve(n);
  out.dists_sq.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.ids.push_back(found[i].id);
    out.dists_sq.push_back(found[i].dist);
  }
  out.distance_evals = evals;
  return out;
}

// Marks every node reachable from `start` along `adj`.
void mark_reachable(const Layer& adj, WordId start, std::vector<char>& mark) {
  std::vector<WordId> stack{start};
  mark[start] = 1;
  while (!stack.empty()) {
    const WordId u = stack.back();
    stack.pop_back();
    for (WordId v : adj[u]) {
      if (!mark[v]) {
        mark[v] = 1;
        stack.push_back(v);
      }
    }
  }
}

Layer reversed(const Layer& adj) {
  Layer rev(adj.size());
  for (std::size_t u = 0; u < adj.size(); ++u) {
    for (WordId v : adj[u]) rev[v].push_back(static_cast<WordId>(u));
  }
  return rev;
}

}  // namespace

// ---------------------------------------------------------------------------
// SwvgParams

double SwvgParams::effective_level_mult() const {
  return level_mult.value_or(1.0 / std::log(static_cast<double>(M)));
}

void SwvgParams::validate() const {
  if (M < 2) throw InvalidArgument("M must be >= 2");
  if (max_neighbors0() < M) throw InvalidArgument("M0 must be >= M");
  if (max_neighbors0() > std::numeric_limits<std::uint16_t>::max()) {
    throw InvalidArgument("M0 must fit the u16 adjacency count");
  }
  if (ef_construction < M) throw InvalidArgument("ef_construction must be >= M");
  const double mult = effective_level_mult();
  if (!(mult > 0.0) || !std::isfinite(mult)) {
    throw InvalidArgument("level_mult must be positive and finite");
  }
}

// ---------------------------------------------------------------------------
// SearchScratch

void SearchScratch::begin(std::size_t node_count) {
  if (marks_.size() != node_count) {
    marks_.assign(node_count, 0);
    epoch_ = 0;
  }
  if (++epoch_ == 0) {
    std::fill(marks_.begin(), marks_.end(), 0);
    epoch_ = 1;
  }
}

// ---------------------------------------------------------------------------
// SwvgGraph

SwvgGraph::SwvgGraph(std::vector<std::uint8_t> levels,
                     std::vector<std::vector<std::vector<WordId>>> adjacency)
    : levels_(std::move(levels)), adjacency_(std::move(adjacency)) {
  if (levels_.empty()) throw FormatError("graph has no nodes");
  const int top = *std::max_element(levels_.begin(), levels_.end());
  if (adjacency_.size() != static_cast<std::size_t>(top) + 1) {
    throw FormatError("graph layer count does not match node levels");
  }
  for (const auto& layer : adjacency_) {
    if (layer.size() != levels_.size()) {
      throw FormatError("graph layer does not cover every node");
    }
  }
  set_entry_from_levels();
  validate();
}

void SwvgGraph::set_entry_from_levels() {
  const auto it = std::max_element(levels_.begin(), levels_.end());
  entry_ = static_cast<WordId>(it - levels_.begin());
}

std::size_t SwvgGraph::max_degree(int layer) const {
  std::size_t best = 0;
  for (const auto& list : adjacency_.at(static_cast<std::size_t>(layer))) {
    best = std::max(best, list.size());
  }
  return best;
}

bool SwvgGraph::layer0_strongly_connected() const {
  if (levels_.empty()) return true;
  const Layer& adj = adjacency_[0];
  std::vector<char> fwd(adj.size(), 0);
  mark_reachable(adj, entry_, fwd);
  if (std::find(fwd.begin(), fwd.end(), 0) != fwd.end()) return false;
  std::vector<char> bwd(adj.size(), 0);
  mark_reachable(reversed(adj), entry_, bwd);
  return std::find(bwd.begin(), bwd.end(), 0) == bwd.end();
}

void SwvgGraph::validate() const {
  const std::size_t n = levels_.size();
  if (n == 0) return;
  if (levels_[entry_] != max_level()) {
    throw FormatError("entry point is not on the top layer");
  }
  std::vector<std::uint32_t> seen(n, 0);
  std::uint32_t stamp = 0;
  for (std::size_t l = 0; l < adjacency_.size(); ++l) {
    for (std::size_t u = 0; u < n; ++u) {
      const auto& list = adjacency_[l][u];
      if (levels_[u] < l && !list.empty()) {
        throw FormatError("node " + std::to_string(u) + " has edges above its level");
      }
      ++stamp;
      for (WordId v : list) {
        if (v >= n) {
          throw FormatError("neighbor id " + std::to_string(v) + " out of range");
        }
        if (v == u) throw FormatError("self loop at node " + std::to_string(u));
        if (levels_[v] < l) {
          throw FormatError("neighbor " + std::to_string(v) + " of node " +
                            std::to_string(u) + " is not on layer " +
                            std::to_string(l));
        }
        if (seen[v] == stamp) {
          throw FormatError("duplicate neighbor " + std::to_string(v) +
                            " at node " + std::to_string(u));
        }
        seen[v] = stamp;
      }
    }
  }
  if (!layer0_strongly_connected()) {
    throw FormatError("layer 0 is not strongly connected");
  }
}

// ---------------------------------------------------------------------------
// Construction

template <typename Scalar>
class GraphBuilder {
 public:
  GraphBuilder(const BasicTransformedPoints<Scalar>& points, const SwvgParams& params)
      : points_(points),
        params_(params),
        scratch_(points.size()) {}

  SwvgGraph build() {
    const std::size_t n = points_.size();
    draw_levels();
    const int top = *std::max_element(graph_.levels_.begin(), graph_.levels_.end());
    graph_.adjacency_.assign(static_cast<std::size_t>(top) + 1, Layer(n));
    for (std::size_t i = 0; i < n; ++i) insert(static_cast<WordId>(i));
    repair_layer0();
    graph_.set_entry_from_levels();
    return std::move(graph_);
  }

 private:
  double dist(WordId a, WordId b) const {
    return squared_distance(points_.row(a), points_.row(b));
  }

  std::size_t capacity(int layer) const {
    return layer == 0 ? params_.max_neighbors0() : params_.M;
  }

  void draw_levels() {
    SplitMix64 rng(params_.seed);
    const double mult = params_.effective_level_mult();
    graph_.levels_.resize(points_.size());
    for (auto& level : graph_.levels_) {
      const double raw = std::floor(-std::log(rng.uniform_open_zero()) * mult);
      // Levels are stored as u8 in the index file.
      level = static_cast<std::uint8_t>(std::min(raw, 255.0));
    }
  }

  std::vector<Candidate> search(WordId target, WordId entry, std::size_t ef, int layer) {
    scratch_.begin(points_.size());
    std::size_t evals = 0;
    const auto z = points_.row(target);
    auto to_target = [&](WordId v) { return squared_distance(points_.row(v), z); };
    const Layer& adj = graph_.adjacency_[static_cast<std::size_t>(layer)];
    auto neighbors_of = [&](WordId v) -> const std::vector<WordId>& { return adj[v]; };
    return best_first(neighbors_of, to_target, entry, ef, scratch_, evals);
  }

  // Walks `sorted` (closest to the base first) and keeps a candidate only if
  // it is strictly closer to the base than to every neighbor kept so far.
  std::vector<WordId> select_neighbors(const std::vector<Candidate>& sorted,
                                       std::size_t limit) const {
    std::vector<WordId> kept;
    kept.reserve(limit);
    for (const Candidate& c : sorted) {
      if (kept.size() >= limit) break;
      bool diverse = true;
      for (WordId r : kept) {
        if (dist(c.id, r) <= c.dist) {
          diverse = false;
          break;
        }
      }
      if (diverse) kept.push_back(c.id);
    }
    return kept;
  }

  // Adds from -> to, re-selecting from's neighbors when over capacity.
  void link(WordId from, WordId to, int layer) {
    auto& list = graph_.adjacency_[static_cast<std::size_t>(layer)][from];
    if (std::find(list.begin(), list.end(), to) != list.end()) return;
    list.push_back(to);
    const std::size_t cap = capacity(layer);
    if (list.size() <= cap) return;
    std::vector<Candidate> cands;
    cands.reserve(list.size());
    for (WordId v : list) cands.push_back({dist(from, v), v});
    std::sort(cands.begin(), cands.end(), closer);
    list = select_neighbors(cands, cap);
  }

  void insert(WordId id) {
    const int level = graph_.levels_[id];
    if (id == 0) {
      entry_ = 0;
      top_ = level;
      return;
    }
    WordId current = entry_;
    for (int l = top_; l > level; --l) {
      current = search(id, current, 1, l).front().id;
    }
    for (int l = std::min(level, top_); l >= 0; --l) {
      const auto found = search(id, current, params_.ef_construction, l);
      auto neighbors = select_neighbors(found, params_.M);
      graph_.adjacency_[static_cast<std::size_t>(l)][id] = neighbors;
      for (WordId v : neighbors) link(v, id, l);
      current = found.front().id;
    }
    if (level > top_) {
      entry_ = id;
      top_ = level;
    }
  }

  // Makes layer 0 strongly connected: first every node reachable from the
  // entry, then the entry reachable from every node. Each orphan component
  // is joined through its closest pair to the connected part, using only
  // endpoints that still have spare out-degree.
  void repair_layer0() {
    Layer& adj = graph_.adjacency_[0];
    const std::size_t n = adj.size();
    const std::size_t cap = capacity(0);

    auto closest_pair = [&](const std::vector<char>& from_set, bool from_flag,
                            const std::vector<WordId>& to_nodes) {
      Candidate best{std::numeric_limits<double>::infinity(), 0};
      WordId best_to = 0;
      for (std::size_t u = 0; u < n; ++u) {
        if ((from_set[u] != 0) != from_flag || adj[u].size() >= cap) continue;
        for (WordId v : to_nodes) {
          const Candidate c{dist(static_cast<WordId>(u), v), static_cast<WordId>(u)};
          if (closer(c, best)) {
            best = c;
            best_to = v;
          }
        }
      }
      if (!std::isfinite(best.dist)) {
        throw Error("layer-0 connectivity repair found no node with spare degree");
      }
      return std::pair<WordId, WordId>{best.id, best_to};
    };

    auto add_edge = [&](WordId a, WordId b) {
      if (std::find(adj[a].begin(), adj[a].end(), b) == adj[a].end()) adj[a].push_back(b);
    };

    for (;;) {
      std::vector<char> fwd(n, 0);
      mark_reachable(adj, entry_, fwd);
      const auto orphan = std::find(fwd.begin(), fwd.end(), 0);
      if (orphan != fwd.end()) {
        // Component: unreached nodes reachable from the first orphan.
        std::vector<char> comp(n, 0);
        mark_reachable(adj, static_cast<WordId>(orphan - fwd.begin()), comp);
        std::vector<WordId> members;
        for (std::size_t v = 0; v < n; ++v) {
          if (comp[v] && !fwd[v]) members.push_back(static_cast<WordId>(v));
        }
        const auto [a, b] = closest_pair(fwd, true, members);
        add_edge(a, b);
        if (adj[b].size() < cap) add_edge(b, a);
        continue;
      }

      std::vector<char> bwd(n, 0);
      mark_reachable(reversed(adj), entry_, bwd);
      const auto stuck = std::find(bwd.begin(), bwd.end(), 0);
      if (stuck == bwd.end()) break;
      // Nodes that cannot reach the entry; everything they reach shares that
      // property, so an edge from any of them into `bwd` fixes the first one.
      std::vector<WordId> targets;
      for (std::size_t v = 0; v < n; ++v) {
        if (bwd[v]) targets.push_back(static_cast<WordId>(v));
      }
      std::vector<char> comp(n, 0);
      mark_reachable(adj, static_cast<WordId>(stuck - bwd.begin()), comp);
      const auto [x, y] = closest_pair(comp, true, targets);
      add_edge(x, y);
    }
  }

  const BasicTransformedPoints<Scalar>& points_;
  const SwvgParams& params_;
  SearchScratch scratch_;
  SwvgGraph graph_;
  WordId entry_ = 0;
  int top_ = 0;
};

template <typename Scalar>
SwvgGraph build_graph(const BasicTransformedPoints<Scalar>& points,
                      const SwvgParams& params) {
  params.validate();
  if (points.size() == 0) throw InvalidArgument("cannot build a graph over zero points");
  return GraphBuilder<Scalar>(points, params).build();
}

// ---------------------------------------------------------------------------
// Search

template <typename Scalar>
SearchResult search_layer(const SwvgGraph& graph,
                          const BasicTransformedPoints<Scalar>& points,
                          const TransformedQuery& q, WordId entry, std::size_t ef,
                          int layer, SearchScratch* scratch) {
  if (graph.node_count() != points.size()) {
    throw InvalidArgument("graph and points disagree on node count");
  }
  if (entry >= graph.node_count()) throw InvalidArgument("entry id out of range");
  if (ef == 0) throw InvalidArgument("ef must be >= 1");
  if (layer < 0 || layer > graph.max_level() || graph.level(entry) < layer) {
    throw InvalidArgument("entry is not present on layer " + std::to_string(layer));
  }
  if (q.h_tilde.size() != points.dim()) {
    throw DimensionError("query has dimension " + std::to_string(q.source_dim()) +
                         ", index expects " + std::to_string(points.source_dim()));
  }
  SearchScratch local;
  SearchScratch& s = scratch ? *scratch : local;
  s.begin(points.size());

  std::size_t evals = 0;
  auto to_query = [&](WordId v) { return squared_distance(points.row(v), q); };
  auto neighbors_of = [&](WordId v) { return graph.neighbors(v, layer); };
  const auto found = best_first(neighbors_of, to_query, entry, ef, s, evals);
  return to_result(found, ef, evals);
}

template <typename Scalar>
SearchResult search_topk(const SwvgGraph& graph,
                         const BasicTransformedPoints<Scalar>& points,
                         const TransformedQuery& q, std::size_t K,
                         std::size_t ef_search, SearchScratch* scratch) {
  if (K == 0 || K > graph.node_count()) {
    throw InvalidArgument("K=" + std::to_string(K) + " is outside [1, " +
                          std::to_string(graph.node_count()) + "]");
  }
  if (ef_search < K) {
    throw InvalidArgument("ef_search=" + std::to_string(ef_search) +
                          " is smaller than K=" + std::to_string(K));
  }
  SearchScratch local;
  SearchScratch& s = scratch ? *scratch : local;
  std::size_t evals = 0;
  WordId current = graph.entry_point();
  for (int l = graph.max_level(); l > 0; --l) {
    const auto step = search_layer(graph, points, q, current, 1, l, &s);
    evals += step.distance_evals;
    current = step.ids.front();
  }
  auto result = search_layer(graph, points, q, current, ef_search, 0, &s);
  result.distance_evals += evals;
  result.ids.resize(std::min(K, result.ids.size()));
  result.dists_sq.resize(result.ids.size());
  return result;
}

template <typename Scalar>
SearchResult flat_search(const BasicTransformedPoints<Scalar>& points,
                         const TransformedQuery& q, std::size_t K) {
  const std::size_t n = points.size();
  if (K == 0 || K > n) {
    throw InvalidArgument("K=" + std::to_string(K) + " is outside [1, " +
                          std::to_string(n) + "]");
  }
  if (q.h_tilde.size() != points.dim()) {
    throw DimensionError("query has dimension " + std::to_string(q.source_dim()) +
                         ", index expects " + std::to_string(points.source_dim()));
  }
  std::vector<Candidate> all(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = static_cast<WordId>(i);
    all[i] = {squared_distance(points.row(id), q), id};
  }
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(K),
                    all.end(), closer);
  return to_result(all, K, n);
}

template <typename Scalar>
BasicIndex<Scalar> build_index(const VocabularyProjection& projection,
                               const SwvgParams& params, BoundMode mode,
                               std::optional<double> explicit_bound) {
  params.validate();
  BasicIndex<Scalar> index;
  index.points = transform_points<Scalar>(projection,
                                          compute_bound(projection, mode, explicit_bound));
  index.graph = build_graph(index.points, params);
  return index;
}

#define FGD_INSTANTIATE_SWVG(S)                                                      \
  template SwvgGraph build_graph<S>(const BasicTransformedPoints<S>&,                \
                                    const SwvgParams&);                              \
  template SearchResult search_layer<S>(const SwvgGraph&,                            \
                                        const BasicTransformedPoints<S>&,            \
                                        const TransformedQuery&, WordId,             \
                                        std::size_t, int, SearchScratch*);           \
  template SearchResult search_topk<S>(const SwvgGraph&,                             \
                                       const BasicTransformedPoints<S>&,             \
                                       const TransformedQuery&, std::size_t,         \
                                       std::size_t, SearchScratch*);                 \
  template SearchResult flat_search<S>(const BasicTransformedPoints<S>&,             \
                                       const TransformedQuery&, std::size_t);        \
  template BasicIndex<S> build_index<S>(const VocabularyProjection&,                 \
                                        const SwvgParams&, BoundMode,                \
                                        std::optional<double>);

FGD_INSTANTIATE_SWVG(float)
FGD_INSTANTIATE_SWVG(double)

#undef FGD_INSTANTIATE_SWVG

}  // namespace fgd
