#pragma once

// Multi-objective primitives over point sets. A point set is a dense
// matrix with one point per row and one (minimized) objective per
// column. All functions are pure; callers own any randomness via
// explicit seeds.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "moselect/random.hpp"
#include "moselect/types.hpp"

namespace moselect {

// True iff p <= q coordinatewise and p < q somewhere.
template <typename DerivedP, typename DerivedQ>
bool dominates(const Eigen::MatrixBase<DerivedP>& p, const Eigen::MatrixBase<DerivedQ>& q) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("dominates: dimension mismatch");
  }
  bool strict = false;
  for (Index i = 0; i < p.size(); ++i) {
    if (p(i) > q(i)) return false;
    if (p(i) < q(i)) strict = true;
  }
  return strict;
}

// Indices (ascending) of the non-dominated rows. Duplicate rows are all
// kept: a point does not dominate its own copy.
template <typename Derived>
std::vector<Index> pareto_front(const Eigen::MatrixBase<Derived>& points) {
  const Index n = points.rows();
  if (n == 0) throw std::invalid_argument("pareto_front: empty point set");
  std::vector<Index> front;
  for (Index i = 0; i < n; ++i) {
    bool dominated = false;
    for (Index j = 0; j < n && !dominated; ++j) {
      if (j != i && dominates(points.row(j), points.row(i))) dominated = true;
    }
    if (!dominated) front.push_back(i);
  }
  return front;
}

// Ascending 1-based ranks with ties mapped to their average rank.
template <typename Derived>
DenseVector<typename Derived::Scalar> average_ranks(const Eigen::MatrixBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  const Index n = values.size();
  if (n == 0) throw std::invalid_argument("average_ranks: empty input");
  for (Index i = 0; i < n; ++i) {
    if (!std::isfinite(static_cast<double>(values(i)))) {
      throw std::invalid_argument("average_ranks: non-finite value");
    }
  }
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](Index a, Index b) { return values(a) < values(b); });
  DenseVector<Scalar> out(n);
  Index i = 0;
  while (i < n) {
    Index j = i;
    while (j + 1 < n && values(idx[static_cast<std::size_t>(j + 1)]) ==
                            values(idx[static_cast<std::size_t>(i)])) {
      ++j;
    }
    // Average rank of the tie run [i, j], 1-based.
    const Scalar avg_rank = static_cast<Scalar>(i + j + 2) / Scalar(2);
    for (Index k = i; k <= j; ++k) out(idx[static_cast<std::size_t>(k)]) = avg_rank;
    i = j + 1;
  }
  return out;
}

// Rank-based remap onto (0, 1): the value with ascending rank i maps to
// (i - 0.5) / N, ties receiving their average rank. Strictly monotone
// transforms of the input leave the output unchanged.
template <typename Derived>
DenseVector<typename Derived::Scalar> quantile_normalize(const Eigen::MatrixBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  const DenseVector<Scalar> ranks = average_ranks(values);
  return ((ranks.array() - Scalar(0.5)) / static_cast<Scalar>(values.size())).matrix();
}

// Column-wise quantile normalization of a point set.
template <typename Derived>
DenseMatrix<typename Derived::Scalar> quantile_normalize_columns(
    const Eigen::MatrixBase<Derived>& points) {
  DenseMatrix<typename Derived::Scalar> out(points.rows(), points.cols());
  for (Index c = 0; c < points.cols(); ++c) {
    out.col(c) = quantile_normalize(points.col(c).eval());
  }
  return out;
}

namespace detail {

// Exact staircase sweep, points sorted by first coordinate.
template <typename Scalar>
Scalar hypervolume_2d(std::vector<std::pair<Scalar, Scalar>> pts, Scalar rx, Scalar ry) {
  std::sort(pts.begin(), pts.end());
  Scalar volume = 0;
  Scalar best_y = ry;
  for (const auto& [x, y] : pts) {
    if (y < best_y) {
      volume += (rx - x) * (best_y - y);
      best_y = y;
    }
  }
  return volume;
}

template <typename Scalar>
Scalar hypervolume_impl(const DenseMatrix<Scalar>& points, const DenseVector<Scalar>& ref) {
  const Index n = points.rows();
  const Index m = points.cols();
  if (n == 0) return Scalar(0);
  if (m == 1) {
    return ref(0) - points.col(0).minCoeff();
  }
  if (m == 2) {
    std::vector<std::pair<Scalar, Scalar>> pts(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) pts[static_cast<std::size_t>(i)] = {points(i, 0), points(i, 1)};
    return hypervolume_2d(std::move(pts), ref(0), ref(1));
  }
  // Slice along the last coordinate; each slab contributes its height
  // times the (m-1)-dimensional volume of the points active in it.
  std::vector<Scalar> cuts(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) cuts[static_cast<std::size_t>(i)] = points(i, m - 1);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const DenseVector<Scalar> sub_ref = ref.head(m - 1);
  Scalar volume = 0;
  for (std::size_t t = 0; t < cuts.size(); ++t) {
    const Scalar lo = cuts[t];
    const Scalar hi = (t + 1 < cuts.size()) ? cuts[t + 1] : ref(m - 1);
    if (hi <= lo) continue;
    Index active = 0;
    for (Index i = 0; i < n; ++i) {
      if (points(i, m - 1) <= lo) ++active;
    }
    DenseMatrix<Scalar> sub(active, m - 1);
    Index row = 0;
    for (Index i = 0; i < n; ++i) {
      if (points(i, m - 1) <= lo) sub.row(row++) = points.row(i).head(m - 1);
    }
    volume += (hi - lo) * hypervolume_impl(sub, sub_ref);
  }
  return volume;
}

}  // namespace detail

// Lebesgue measure of { q : exists p in points with p <= q <= ref }.
// Points with any coordinate beyond the reference span an empty box and
// are dropped. Exact: 2-D by sweep, higher dimensions by recursive
// slicing.
template <typename DerivedP, typename DerivedR>
typename DerivedP::Scalar hypervolume(const Eigen::MatrixBase<DerivedP>& points,
                                      const Eigen::MatrixBase<DerivedR>& ref) {
  using Scalar = typename DerivedP::Scalar;
  const Index m = points.cols();
  if (points.rows() > 0 && m != ref.size()) {
    throw std::invalid_argument("hypervolume: dimension mismatch");
  }
  Index kept = 0;
  for (Index i = 0; i < points.rows(); ++i) {
    if ((points.row(i).transpose().array() <= ref.array()).all()) ++kept;
  }
  DenseMatrix<Scalar> clipped(kept, m);
  Index row = 0;
  for (Index i = 0; i < points.rows(); ++i) {
    if ((points.row(i).transpose().array() <= ref.array()).all()) clipped.row(row++) = points.row(i);
  }
  const DenseVector<Scalar> r = ref.eval();
  return detail::hypervolume_impl(clipped, r);
}

// Hypervolume of the non-dominated subset of `all_points` minus the
// hypervolume of `selected`. Zero iff the selection covers the front's
// dominated region.
template <typename DerivedS, typename DerivedA, typename DerivedR>
typename DerivedA::Scalar hypervolume_error(const Eigen::MatrixBase<DerivedS>& selected,
                                            const Eigen::MatrixBase<DerivedA>& all_points,
                                            const Eigen::MatrixBase<DerivedR>& ref) {
  if (selected.rows() > 0 && all_points.rows() > 0 && selected.cols() != all_points.cols()) {
    throw std::invalid_argument("hypervolume_error: dimension mismatch");
  }
  using Scalar = typename DerivedA::Scalar;
  const std::vector<Index> front = pareto_front(all_points);
  DenseMatrix<Scalar> front_points(static_cast<Index>(front.size()), all_points.cols());
  for (std::size_t i = 0; i < front.size(); ++i) {
    front_points.row(static_cast<Index>(i)) = all_points.row(front[i]);
  }
  return hypervolume(front_points, ref) - hypervolume(selected, ref);
}

// Greedy farthest-point ordering: order[0] = first, each next element
// maximizes the minimum Euclidean distance to everything already
// chosen. Ties break toward the smallest index.
template <typename Derived>
std::vector<Index> epsilon_net_order(const Eigen::MatrixBase<Derived>& points, Index first) {
  using Scalar = typename Derived::Scalar;
  const Index n = points.rows();
  if (n == 0) throw std::invalid_argument("epsilon_net_order: empty point set");
  if (first < 0 || first >= n) throw std::invalid_argument("epsilon_net_order: invalid first index");

  std::vector<Index> order;
  order.reserve(static_cast<std::size_t>(n));
  order.push_back(first);

  std::vector<Scalar> min_dist(static_cast<std::size_t>(n));
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  chosen[static_cast<std::size_t>(first)] = true;
  for (Index i = 0; i < n; ++i) {
    min_dist[static_cast<std::size_t>(i)] = (points.row(i) - points.row(first)).norm();
  }
  while (static_cast<Index>(order.size()) < n) {
    Index best = -1;
    Scalar best_dist = -std::numeric_limits<Scalar>::infinity();
    for (Index i = 0; i < n; ++i) {
      if (!chosen[static_cast<std::size_t>(i)] && min_dist[static_cast<std::size_t>(i)] > best_dist) {
        best = i;
        best_dist = min_dist[static_cast<std::size_t>(i)];
      }
    }
    chosen[static_cast<std::size_t>(best)] = true;
    order.push_back(best);
    for (Index i = 0; i < n; ++i) {
      if (!chosen[static_cast<std::size_t>(i)]) {
        const Scalar d = (points.row(i) - points.row(best)).norm();
        if (d < min_dist[static_cast<std::size_t>(i)]) min_dist[static_cast<std::size_t>(i)] = d;
      }
    }
  }
  return order;
}

struct LayeredOrder {
  // Concatenated within-layer orderings; a permutation of all indices.
  std::vector<Index> order;
  // Exclusive end offset of each layer within `order`; the last entry
  // equals order.size().
  std::vector<Index> layer_ends;

  Index num_layers() const { return static_cast<Index>(layer_ends.size()); }
};

// Iteratively peels Pareto fronts into layers and orders each layer by
// the farthest-point rule, the first element drawn from the seeded
// generator. The layer partition does not depend on the seed.
template <typename Derived>
LayeredOrder non_dominated_sort(const Eigen::MatrixBase<Derived>& points, std::uint64_t seed) {
  using Scalar = typename Derived::Scalar;
  const Index n = points.rows();
  if (n == 0) throw std::invalid_argument("non_dominated_sort: empty point set");

  Rng rng(seed);
  LayeredOrder result;
  std::vector<Index> remaining(static_cast<std::size_t>(n));
  std::iota(remaining.begin(), remaining.end(), Index{0});

  while (!remaining.empty()) {
    DenseMatrix<Scalar> sub(static_cast<Index>(remaining.size()), points.cols());
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      sub.row(static_cast<Index>(i)) = points.row(remaining[i]);
    }
    const std::vector<Index> local_front = pareto_front(sub);

    DenseMatrix<Scalar> layer_points(static_cast<Index>(local_front.size()), points.cols());
    for (std::size_t i = 0; i < local_front.size(); ++i) {
      layer_points.row(static_cast<Index>(i)) = sub.row(local_front[i]);
    }
    const Index start = static_cast<Index>(rng.below(local_front.size()));
    const std::vector<Index> layer_order = epsilon_net_order(layer_points, start);

    for (Index pos : layer_order) {
      result.order.push_back(remaining[static_cast<std::size_t>(local_front[static_cast<std::size_t>(pos)])]);
    }
    result.layer_ends.push_back(static_cast<Index>(result.order.size()));

    std::vector<bool> in_front(remaining.size(), false);
    for (Index pos : local_front) in_front[static_cast<std::size_t>(pos)] = true;
    std::vector<Index> next;
    next.reserve(remaining.size() - local_front.size());
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      if (!in_front[i]) next.push_back(remaining[i]);
    }
    remaining = std::move(next);
  }
  return result;
}

}  // namespace moselect
