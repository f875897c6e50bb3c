#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "vbsim/geom.hpp"
#include "vbsim/point_grid.hpp"

// Hierarchical density-based clustering. Pipeline: core distances (distance
// to the min_samples-th nearest other point), mutual-reachability distances,
// exact minimum spanning tree, single-linkage dendrogram, condensed tree with
// min_cluster_size, excess-of-mass cluster selection. Points outside every
// selected cluster are labeled -1.

namespace vbsim::hdbscan {

using geom::Vec3;

struct Params {
  int min_cluster_size = 5;
  int min_samples = 5;
  // When no split ever produces two children of at least min_cluster_size
  // points, standard excess-of-mass selection returns nothing. With this flag
  // the root competes for selection, so a lone dense group is still found.
  bool allow_single_cluster = false;
  // Membership cut used only when the root itself is selected: a point
  // belongs iff its fall-out density is at least this fraction of the
  // densest fall-out, separating one tight group from stray outliers.
  double root_membership_ratio = 0.05;
};

struct ClusterLabels {
  std::vector<int> labels;  // -1 = noise; cluster ids contiguous from 0

  int num_clusters() const {
    int c = -1;
    for (int l : labels) c = std::max(c, l);
    return c + 1;
  }
};

namespace detail_hdb {

constexpr double kDistFloor = 1e-12;  // coincident points get finite lambda

struct Edge {
  int a = 0, b = 0;
  double d = 0.0;
};

inline std::vector<double> core_distances(const std::vector<Vec3>& pts, int min_samples) {
  const int n = static_cast<int>(pts.size());
  std::vector<double> core(static_cast<std::size_t>(n), 0.0);
  if (n <= 1) return core;
  const int k = std::min(min_samples, n - 1);
  std::vector<std::vector<int>> idx;
  std::vector<std::vector<double>> d2;
  vbsim::detail::all_knn(pts, k, idx, d2);
  for (int i = 0; i < n; ++i) core[static_cast<std::size_t>(i)] = std::sqrt(d2[static_cast<std::size_t>(i)].back());
  return core;
}

// Exact MST of the complete mutual-reachability graph (Prim, O(n^2)).
// Deterministic: growth starts at point 0 and distance ties keep the
// lower-index attachment.
inline std::vector<Edge> mutual_reachability_mst(const std::vector<Vec3>& pts,
                                                 const std::vector<double>& core) {
  const int n = static_cast<int>(pts.size());
  std::vector<Edge> edges;
  if (n <= 1) return edges;
  edges.reserve(static_cast<std::size_t>(n) - 1);

  std::vector<double> best(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<int> from(static_cast<std::size_t>(n), 0);
  std::vector<char> used(static_cast<std::size_t>(n), 0);

  int current = 0;
  used[0] = 1;
  for (int added = 1; added < n; ++added) {
    const Vec3 pc = pts[static_cast<std::size_t>(current)];
    const double cc = core[static_cast<std::size_t>(current)];
    int next = -1;
    double next_d = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (used[j]) continue;
      const double d = std::max({geom::distance(pc, pts[static_cast<std::size_t>(j)]), cc,
                                 core[static_cast<std::size_t>(j)]});
      if (d < best[j]) {
        best[j] = d;
        from[j] = current;
      }
      if (best[j] < next_d) {
        next_d = best[j];
        next = j;
      }
    }
    used[next] = 1;
    edges.push_back({from[static_cast<std::size_t>(next)], next, next_d});
    current = next;
  }

  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    if (x.d != y.d) return x.d < y.d;
    const int xl = std::min(x.a, x.b), yl = std::min(y.a, y.b);
    if (xl != yl) return xl < yl;
    return std::max(x.a, x.b) < std::max(y.a, y.b);
  });
  return edges;
}

struct LinkageNode {
  int child_a = -1, child_b = -1;  // node ids (< n are leaves)
  double dist = 0.0;
  int size = 0;
};

// Single-linkage dendrogram from sorted MST edges. Node ids n..2n-2; the last
// node is the root.
inline std::vector<LinkageNode> single_linkage(int n, const std::vector<Edge>& edges) {
  std::vector<LinkageNode> nodes(static_cast<std::size_t>(std::max(0, 2 * n - 1)));
  for (int i = 0; i < n; ++i) nodes[static_cast<std::size_t>(i)].size = 1;
  std::vector<int> repr(static_cast<std::size_t>(2 * n - 1));
  std::vector<int> parent(static_cast<std::size_t>(2 * n - 1), -1);
  for (int i = 0; i < 2 * n - 1; ++i) repr[static_cast<std::size_t>(i)] = i;
  auto find = [&parent](int x) {
    while (parent[static_cast<std::size_t>(x)] != -1) x = parent[static_cast<std::size_t>(x)];
    return x;
  };
  int next = n;
  for (const Edge& e : edges) {
    const int ra = find(e.a), rb = find(e.b);
    LinkageNode& nd = nodes[static_cast<std::size_t>(next)];
    nd.child_a = ra;
    nd.child_b = rb;
    nd.dist = e.d;
    nd.size = nodes[static_cast<std::size_t>(ra)].size + nodes[static_cast<std::size_t>(rb)].size;
    parent[static_cast<std::size_t>(ra)] = next;
    parent[static_cast<std::size_t>(rb)] = next;
    ++next;
  }
  return nodes;
}

inline void collect_leaves(const std::vector<LinkageNode>& nodes, int n, int node,
                           std::vector<int>& out) {
  std::vector<int> stack{node};
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    if (v < n) {
      out.push_back(v);
    } else {
      stack.push_back(nodes[static_cast<std::size_t>(v)].child_a);
      stack.push_back(nodes[static_cast<std::size_t>(v)].child_b);
    }
  }
}

struct CondensedTree {
  // Per condensed cluster:
  std::vector<int> parent;          // parent cluster id, -1 for root
  std::vector<double> birth;        // lambda at which the cluster appeared
  std::vector<double> stability;    // sum over members of (lambda_left - birth)
  // Per point:
  std::vector<int> point_cluster;   // cluster the point fell out of
  std::vector<double> point_lambda; // lambda at which it fell out
};

inline CondensedTree condense(const std::vector<LinkageNode>& nodes, int n,
                              int min_cluster_size) {
  CondensedTree t;
  t.parent = {-1};
  t.birth = {0.0};
  t.stability = {0.0};
  t.point_cluster.assign(static_cast<std::size_t>(n), 0);
  t.point_lambda.assign(static_cast<std::size_t>(n), 0.0);

  struct Item {
    int node;
    int cluster;
  };
  std::vector<Item> stack{{2 * n - 2, 0}};
  std::vector<int> leaves;
  while (!stack.empty()) {
    const Item it = stack.back();
    stack.pop_back();
    const LinkageNode& nd = nodes[static_cast<std::size_t>(it.node)];
    const double lambda = 1.0 / std::max(nd.dist, kDistFloor);
    const int ca = nd.child_a, cb = nd.child_b;
    const int sa = ca < n ? 1 : nodes[static_cast<std::size_t>(ca)].size;
    const int sb = cb < n ? 1 : nodes[static_cast<std::size_t>(cb)].size;

    auto fall_out = [&](int side, int count) {
      leaves.clear();
      collect_leaves(nodes, n, side, leaves);
      for (int p : leaves) {
        t.point_cluster[static_cast<std::size_t>(p)] = it.cluster;
        t.point_lambda[static_cast<std::size_t>(p)] = lambda;
        t.stability[static_cast<std::size_t>(it.cluster)] +=
            lambda - t.birth[static_cast<std::size_t>(it.cluster)];
      }
      (void)count;
    };

    if (sa >= min_cluster_size && sb >= min_cluster_size) {
      // True split: both sides persist as new clusters.
      for (int side : {ca, cb}) {
        const int id = static_cast<int>(t.parent.size());
        t.parent.push_back(it.cluster);
        t.birth.push_back(lambda);
        t.stability.push_back(0.0);
        t.stability[static_cast<std::size_t>(it.cluster)] +=
            static_cast<double>(side < n ? 1 : nodes[static_cast<std::size_t>(side)].size) *
            (lambda - t.birth[static_cast<std::size_t>(it.cluster)]);
        if (side >= n)
          stack.push_back({side, id});
        else {
          // min_cluster_size == 1 corner: a leaf forms a singleton cluster.
          t.point_cluster[static_cast<std::size_t>(side)] = id;
          t.point_lambda[static_cast<std::size_t>(side)] = lambda;
        }
      }
    } else if (sa >= min_cluster_size || sb >= min_cluster_size) {
      // The small side sheds as noise of the current cluster; the big side
      // carries the cluster identity on.
      const int big = sa >= min_cluster_size ? ca : cb;
      const int small = sa >= min_cluster_size ? cb : ca;
      fall_out(small, std::min(sa, sb));
      if (big >= n) {
        stack.push_back({big, it.cluster});
      } else {
        t.point_cluster[static_cast<std::size_t>(big)] = it.cluster;
        t.point_lambda[static_cast<std::size_t>(big)] = lambda;
      }
    } else {
      fall_out(ca, sa);
      fall_out(cb, sb);
    }
  }
  return t;
}

}  // namespace detail_hdb

/// HDBSCAN over 3D points. Deterministic for a fixed input order; the
/// partition is invariant to input permutation up to label renaming (ties in
/// pairwise distances aside). Cluster ids are assigned by ascending smallest
/// member index.
inline ClusterLabels cluster(const std::vector<Vec3>& points, const Params& params) {
  if (params.min_cluster_size < 2)
    throw std::invalid_argument("hdbscan: min_cluster_size must be >= 2");
  if (params.min_samples < 1) throw std::invalid_argument("hdbscan: min_samples must be >= 1");

  const int n = static_cast<int>(points.size());
  ClusterLabels out;
  out.labels.assign(static_cast<std::size_t>(n), -1);
  if (n < params.min_cluster_size) return out;

  using namespace detail_hdb;
  const auto core = core_distances(points, params.min_samples);
  const auto edges = mutual_reachability_mst(points, core);
  const auto nodes = single_linkage(n, edges);
  const auto tree = condense(nodes, n, params.min_cluster_size);

  const int num_clusters = static_cast<int>(tree.parent.size());

  // Excess-of-mass selection, bottom-up (children always have larger ids).
  std::vector<double> propagated(tree.stability);
  std::vector<char> selected(static_cast<std::size_t>(num_clusters), 0);
  std::vector<std::vector<int>> children(static_cast<std::size_t>(num_clusters));
  for (int c = 1; c < num_clusters; ++c)
    children[static_cast<std::size_t>(tree.parent[static_cast<std::size_t>(c)])].push_back(c);

  const int first = params.allow_single_cluster ? 0 : 1;
  for (int c = num_clusters - 1; c >= first; --c) {
    double child_sum = 0.0;
    for (int d : children[static_cast<std::size_t>(c)])
      child_sum += propagated[static_cast<std::size_t>(d)];
    if (children[static_cast<std::size_t>(c)].empty() ||
        tree.stability[static_cast<std::size_t>(c)] >= child_sum) {
      selected[static_cast<std::size_t>(c)] = 1;
      propagated[static_cast<std::size_t>(c)] = tree.stability[static_cast<std::size_t>(c)];
    } else {
      propagated[static_cast<std::size_t>(c)] = child_sum;
    }
  }
  // A selected ancestor absorbs any selected descendants.
  for (int c = 1; c < num_clusters; ++c) {
    if (!selected[static_cast<std::size_t>(c)]) continue;
    for (int a = tree.parent[static_cast<std::size_t>(c)]; a != -1;
         a = tree.parent[static_cast<std::size_t>(a)])
      if (selected[static_cast<std::size_t>(a)]) {
        selected[static_cast<std::size_t>(c)] = 0;
        break;
      }
  }

  // Root membership threshold (only relevant when the root got selected).
  double root_lambda_cut = 0.0;
  if (selected[0]) {
    double lmax = 0.0;
    for (double l : tree.point_lambda) lmax = std::max(lmax, l);
    root_lambda_cut = params.root_membership_ratio * lmax;
  }

  // Label each point by its nearest selected ancestor cluster.
  std::vector<int> raw_label(static_cast<std::size_t>(n), -1);
  for (int p = 0; p < n; ++p) {
    int c = tree.point_cluster[static_cast<std::size_t>(p)];
    while (c != -1 && !selected[static_cast<std::size_t>(c)])
      c = tree.parent[static_cast<std::size_t>(c)];
    if (c == -1) continue;
    if (c == 0 && tree.point_lambda[static_cast<std::size_t>(p)] < root_lambda_cut) continue;
    raw_label[static_cast<std::size_t>(p)] = c;
  }

  // Contiguous ids ordered by smallest member index.
  std::vector<int> remap(static_cast<std::size_t>(num_clusters), -1);
  int next_id = 0;
  for (int p = 0; p < n; ++p) {
    const int c = raw_label[static_cast<std::size_t>(p)];
    if (c >= 0 && remap[static_cast<std::size_t>(c)] == -1)
      remap[static_cast<std::size_t>(c)] = next_id++;
  }
  for (int p = 0; p < n; ++p)
    out.labels[static_cast<std::size_t>(p)] =
        raw_label[static_cast<std::size_t>(p)] >= 0
            ? remap[static_cast<std::size_t>(raw_label[static_cast<std::size_t>(p)])]
            : -1;
  return out;
}

/// Signature matching the operation contract; forwards to cluster().
inline ClusterLabels cluster(const std::vector<Vec3>& points, int min_cluster_size,
                             int min_samples) {
  Params p;
  p.min_cluster_size = min_cluster_size;
  p.min_samples = min_samples;
  return cluster(points, p);
}

}  // namespace vbsim::hdbscan
