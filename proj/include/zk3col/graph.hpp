#pragma once

#include <algorithm>
#include <cmath>
#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "zk3col/error.hpp"
#include "zk3col/rng.hpp"

namespace zk3col {

using Vertex = std::uint32_t;

struct Edge {
  Vertex u = 0;
  Vertex v = 0;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

using Color = int;
inline constexpr int kNumColors = 3;

constexpr bool is_valid_color(Color c) { return c >= 1 && c <= kNumColors; }

// Undirected simple graph with edges held in canonical order
// (u < v, sorted lexicographically). Edge indices refer to this order.
class Graph {
 public:
  Graph() = default;

  Graph(std::size_t n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges)) {
    for (auto& e : edges_) {
      if (e.u == e.v) throw Error(ErrorCode::invalid_argument, "self-loop at vertex " + std::to_string(e.u));
      if (e.u > e.v) std::swap(e.u, e.v);
      if (e.v >= n_) throw Error(ErrorCode::invalid_argument, "edge endpoint out of range");
    }
    std::sort(edges_.begin(), edges_.end());
    if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end())
      throw Error(ErrorCode::invalid_argument, "duplicate edge");
    if (edges_.empty()) throw Error(ErrorCode::invalid_argument, "graph has no edges");
    adjacency_.assign(n_, {});
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      adjacency_[edges_[i].u].push_back({edges_[i].v, i});
      adjacency_[edges_[i].v].push_back({edges_[i].u, i});
    }
  }

  std::size_t n() const { return n_; }
  std::size_t m() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(std::size_t i) const { return edges_.at(i); }

  std::optional<std::size_t> edge_index(Edge e) const {
    if (e.u > e.v) std::swap(e.u, e.v);
    auto it = std::lower_bound(edges_.begin(), edges_.end(), e);
    if (it == edges_.end() || *it != e) return std::nullopt;
    return static_cast<std::size_t>(it - edges_.begin());
  }
  bool has_edge(Edge e) const { return edge_index(e).has_value(); }

  struct Incidence {
    Vertex neighbor;
    std::size_t edge;
  };
  const std::vector<Incidence>& incident(Vertex v) const { return adjacency_.at(v); }

  bool connected() const {
    if (n_ == 0) return true;
    std::vector<bool> seen(n_, false);
    std::vector<Vertex> stack{0};
    seen[0] = true;
    std::size_t count = 1;
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      for (auto [w, _] : adjacency_[v]) {
        if (!seen[w]) {
          seen[w] = true;
          ++count;
          stack.push_back(w);
        }
      }
    }
    return count == n_;
  }

  friend bool operator==(const Graph& a, const Graph& b) { return a.n_ == b.n_ && a.edges_ == b.edges_; }

 private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<Incidence>> adjacency_;
};

// Total map vertex -> color in {1,2,3}.
class Coloring {
 public:
  Coloring() = default;
  explicit Coloring(std::vector<Color> colors) : colors_(std::move(colors)) {
    for (auto c : colors_)
      if (!is_valid_color(c)) throw Error(ErrorCode::invalid_argument, "color outside {1,2,3}: " + std::to_string(c));
  }

  std::size_t size() const { return colors_.size(); }
  Color operator[](Vertex v) const { return colors_.at(v); }
  const std::vector<Color>& values() const { return colors_; }

  friend bool operator==(const Coloring&, const Coloring&) = default;

 private:
  std::vector<Color> colors_;
};

namespace detail {
inline void require_total(const Graph& g, const Coloring& c) {
  if (c.size() != g.n())
    throw Error(ErrorCode::invalid_argument, "coloring covers " + std::to_string(c.size()) + " of " +
                                                 std::to_string(g.n()) + " vertices");
}
}  // namespace detail

// Parses "p edge n m" followed by m "e u v" lines (1-indexed). Lines starting
// with 'c' and blank lines are ignored.
inline Graph parse_graph(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::pair<std::size_t, std::size_t>> header;
  std::vector<Edge> edges;
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::parse_error, "line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag == "c") continue;
    if (tag == "p") {
      std::string format;
      long long n = -1, m = -1;
      if (header) fail("duplicate header");
      if (!(ls >> format >> n >> m) || format != "edge" || n < 1 || m < 0) fail("malformed header");
      header = {static_cast<std::size_t>(n), static_cast<std::size_t>(m)};
    } else if (tag == "e") {
      if (!header) fail("edge before header");
      long long u = 0, v = 0;
      if (!(ls >> u >> v)) fail("malformed edge line");
      if (u < 1 || v < 1 || static_cast<std::size_t>(u) > header->first || static_cast<std::size_t>(v) > header->first)
        fail("vertex id out of range");
      if (u == v) fail("self-loop");
      Edge e{static_cast<Vertex>(u - 1), static_cast<Vertex>(v - 1)};
      if (e.u > e.v) std::swap(e.u, e.v);
      edges.push_back(e);
    } else {
      fail("unknown line tag '" + tag + "'");
    }
  }
  if (!header) throw Error(ErrorCode::parse_error, "missing header");
  if (edges.size() != header->second)
    throw Error(ErrorCode::parse_error, "edge count mismatch: header says " + std::to_string(header->second) +
                                            ", found " + std::to_string(edges.size()));
  auto sorted = edges;
  std::sort(sorted.begin(), sorted.end());
  if (auto dup = std::adjacent_find(sorted.begin(), sorted.end()); dup != sorted.end())
    throw Error(ErrorCode::parse_error,
                "duplicate edge " + std::to_string(dup->u + 1) + " " + std::to_string(dup->v + 1));
  return Graph(header->first, std::move(edges));
}

inline std::string to_dimacs(const Graph& g) {
  std::ostringstream out;
  out << "p edge " << g.n() << ' ' << g.m() << '\n';
  for (const auto& e : g.edges()) out << "e " << e.u + 1 << ' ' << e.v + 1 << '\n';
  return out.str();
}

inline std::vector<Edge> monochromatic_edges(const Graph& g, const Coloring& c) {
  detail::require_total(g, c);
  std::vector<Edge> bad;
  for (const auto& e : g.edges())
    if (c[e.u] == c[e.v]) bad.push_back(e);
  return bad;
}

inline bool is_proper(const Graph& g, const Coloring& c) {
  detail::require_total(g, c);
  return std::none_of(g.edges().begin(), g.edges().end(), [&](const Edge& e) { return c[e.u] == c[e.v]; });
}

struct PlantedInstance {
  Graph graph;
  Coloring coloring;
};

// Random 3-colorable graph around a hidden partition into three near-equal
// classes. A cross-class spanning path guarantees connectivity.
inline PlantedInstance planted_3colorable(std::size_t n, double edge_prob, std::uint64_t seed) {
  if (n < 3) throw Error(ErrorCode::invalid_argument, "planted_3colorable: n must be >= 3");
  if (!(edge_prob > 0.0 && edge_prob <= 1.0))
    throw Error(ErrorCode::invalid_argument, "planted_3colorable: edge_prob must be in (0, 1]");
  Rng rng(seed);

  std::vector<Color> colors(n);
  for (std::size_t v = 0; v < n; ++v) colors[v] = static_cast<Color>(v % 3) + 1;
  for (std::size_t i = n - 1; i > 0; --i) std::swap(colors[i], colors[rng.uniform_index(i + 1)]);

  std::vector<Edge> edges;
  for (Vertex u = 0; u < n; ++u)
    for (Vertex v = u + 1; v < n; ++v)
      if (colors[u] != colors[v] && rng.bernoulli(edge_prob)) edges.push_back({u, v});

  // Spanning path: walk the vertices in an order that alternates classes, so
  // every consecutive pair is cross-class.
  std::vector<std::vector<Vertex>> by_class(3);
  for (Vertex v = 0; v < n; ++v) by_class[colors[v] - 1].push_back(v);
  std::sort(by_class.begin(), by_class.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });
  std::vector<Vertex> path;
  std::vector<std::size_t> next(3, 0);
  int prev_class = -1;
  while (path.size() < n) {
    int best = -1;
    for (int c = 0; c < 3; ++c) {
      if (c == prev_class || next[c] >= by_class[c].size()) continue;
      if (best < 0 || by_class[c].size() - next[c] > by_class[best].size() - next[best]) best = c;
    }
    path.push_back(by_class[best][next[best]++]);
    prev_class = best;
  }
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    Edge e{std::min(path[i], path[i + 1]), std::max(path[i], path[i + 1])};
    edges.push_back(e);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return {Graph(n, std::move(edges)), Coloring(std::move(colors))};
}

inline double conflict_weight(const Graph& g, const Coloring& c, std::span<const double> edge_weights) {
  detail::require_total(g, c);
  double total = 0.0;
  for (std::size_t i = 0; i < g.m(); ++i)
    if (c[g.edge(i).u] == c[g.edge(i).v]) total += edge_weights[i];
  return total;
}

struct LocalSearchOptions {
  std::size_t restarts = 20;
  std::size_t moves_per_vertex = 50;
};

// Weighted min-conflict local search. Each restart starts from a random
// assignment and repeatedly applies the single-vertex recolor with the best
// weight change (ties: lowest vertex, then lowest color). On a plateau it
// takes a zero-change move on a conflicted vertex other than the one just
// moved. Returns the lowest-weight assignment seen.
inline Coloring min_conflict_coloring(const Graph& g, std::span<const double> edge_weights, std::uint64_t seed,
                                      LocalSearchOptions opts = {}) {
  if (edge_weights.size() != g.m())
    throw Error(ErrorCode::invalid_argument, "min_conflict_coloring: expected " + std::to_string(g.m()) +
                                                 " edge weights, got " + std::to_string(edge_weights.size()));
  for (double w : edge_weights)
    if (!(w >= 0.0)) throw Error(ErrorCode::invalid_argument, "min_conflict_coloring: negative or NaN weight");
  if (opts.restarts == 0) opts.restarts = 1;

  Rng rng(seed);
  const std::size_t n = g.n();
  const std::size_t max_moves = opts.moves_per_vertex * n;
  std::vector<Color> best;
  double best_weight = std::numeric_limits<double>::infinity();

  std::vector<Color> cur(n);
  // cost[v][c]: weight of edges at v whose other endpoint has color c
  std::vector<std::array<double, kNumColors + 1>> cost(n);

  for (std::size_t r = 0; r < opts.restarts && best_weight > 0.0; ++r) {
    for (auto& c : cur) c = static_cast<Color>(rng.uniform_index(kNumColors)) + 1;
    for (Vertex v = 0; v < n; ++v) {
      cost[v].fill(0.0);
      for (auto [w, ei] : g.incident(v)) cost[v][cur[w]] += edge_weights[ei];
    }
    auto exact_weight = [&] {
      double total = 0.0;
      for (std::size_t i = 0; i < g.m(); ++i)
        if (cur[g.edge(i).u] == cur[g.edge(i).v]) total += edge_weights[i];
      return total;
    };
    double weight = exact_weight();

    auto recolor = [&](Vertex v, Color to) {
      const Color from = cur[v];
      weight += cost[v][to] - cost[v][from];
      for (auto [w, ei] : g.incident(v)) {
        cost[w][from] -= edge_weights[ei];
        cost[w][to] += edge_weights[ei];
      }
      cur[v] = to;
    };

    if (weight < best_weight) best_weight = weight, best = cur;
    std::optional<Vertex> last_moved;
    for (std::size_t step = 0; step < max_moves && weight > 1e-12; ++step) {
      double best_delta = std::numeric_limits<double>::infinity();
      Vertex bv = 0;
      Color bc = 0;
      std::optional<std::pair<Vertex, Color>> sideways;
      for (Vertex v = 0; v < n; ++v) {
        const bool conflicted = cost[v][cur[v]] > 1e-12;
        for (Color c = 1; c <= kNumColors; ++c) {
          if (c == cur[v]) continue;
          const double delta = cost[v][c] - cost[v][cur[v]];
          if (delta < best_delta) best_delta = delta, bv = v, bc = c;
          if (std::abs(delta) <= 1e-12 && conflicted && !sideways && last_moved != v) sideways = {v, c};
        }
      }
      if (best_delta < -1e-12) {
        recolor(bv, bc);
        last_moved = bv;
      } else if (sideways) {
        recolor(sideways->first, sideways->second);
        last_moved = sideways->first;
      } else {
        break;
      }
      if (weight < best_weight - 1e-12) {
        weight = exact_weight();
        if (weight < best_weight) best_weight = weight, best = cur;
      }
    }
  }
  return Coloring(std::move(best));
}

inline Coloring min_conflict_coloring(const Graph& g, const std::map<Edge, double>& edge_weights,
                                      std::uint64_t seed, LocalSearchOptions opts = {}) {
  std::vector<double> w(g.m());
  for (std::size_t i = 0; i < g.m(); ++i) {
    auto it = edge_weights.find(g.edge(i));
    if (it == edge_weights.end())
      throw Error(ErrorCode::invalid_argument, "min_conflict_coloring: missing weight for edge (" +
                                                   std::to_string(g.edge(i).u) + "," + std::to_string(g.edge(i).v) +
                                                   ")");
    w[i] = it->second;
  }
  return min_conflict_coloring(g, w, seed, opts);
}

}  // namespace zk3col
