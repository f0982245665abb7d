"""Exact k-nearest-neighbour search: brute force and a leaf-batched kd-tree.

Both paths compute every pairwise distance with the same elementwise
expression (coordinates summed in index order), so the tree reproduces
brute force bit for bit. Ties are broken by the lower point index.
"""

from __future__ import annotations

import numpy as np

from mvmem.errors import KTooLarge, ShapeMismatch

_CHUNK = 512


def as_points(points):
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
        raise ShapeMismatch(f"expected an n x q point matrix, got shape {pts.shape}")
    return pts


def pairwise_distances(a, b):
    """Euclidean distances between rows of ``a`` [m, q] and ``b`` [n, q]."""
    at = np.ascontiguousarray(a.T)
    bt = np.ascontiguousarray(b.T)
    d2 = np.subtract(at[0][:, None], bt[0][None, :])
    np.multiply(d2, d2, out=d2)
    if a.shape[1] > 1:
        diff = np.empty_like(d2)
        for c in range(1, a.shape[1]):
            np.subtract(at[c][:, None], bt[c][None, :], out=diff)
            np.multiply(diff, diff, out=diff)
            d2 += diff
    return np.sqrt(d2, out=d2)


def _check_k(n, k):
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > n - 1:
        raise KTooLarge(f"k={k} needs at least {k + 1} points, got {n}")


def _smallest_k(d, k):
    """Column indices of the k smallest entries per row, in (distance, index) order."""
    kth = np.partition(d, k - 1, axis=1)[:, k - 1 : k]
    less = d < kth
    tied = d == kth
    room = k - less.sum(axis=1, keepdims=True)
    take = less | (tied & (np.cumsum(tied, axis=1) <= room))
    cols = np.nonzero(take)[1].reshape(d.shape[0], k)
    order = np.argsort(np.take_along_axis(d, cols, axis=1), axis=1, kind="stable")
    return np.take_along_axis(cols, order, axis=1)


def brute_knn(points, k):
    """The k nearest other points of every point: (distances [n, k], indices [n, k])."""
    pts = as_points(points)
    n = pts.shape[0]
    _check_k(n, k)
    out_d = np.empty((n, k))
    out_i = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, _CHUNK):
        stop = min(n, start + _CHUNK)
        d = pairwise_distances(pts[start:stop], pts)
        rows = np.arange(stop - start)
        d[rows, rows + start] = np.inf
        order = _smallest_k(d, k)
        out_d[start:stop] = np.take_along_axis(d, order, axis=1)
        out_i[start:stop] = order
    return out_d, out_i


class KDTree:
    """Immutable kd-tree over a fixed point set.

    Queries are processed a leaf at a time: every query in a group shares the
    group's bounding box, so a candidate leaf is skipped once its box-to-box
    gap exceeds the worst current k-th distance in the group.
    """

    def __init__(self, points, leaf_size=32):
        self.points = as_points(points).copy()
        self.points.setflags(write=False)
        self.leaf_size = leaf_size
        self.leaves = []
        # internal nodes: (dim, threshold, left, right); negative child = ~leaf_id
        self._nodes = []
        self._root = self._build(np.arange(self.points.shape[0]))
        self.lo = np.array([self.points[ix].min(axis=0) for ix in self.leaves])
        self.hi = np.array([self.points[ix].max(axis=0) for ix in self.leaves])

    def _build(self, idx):
        pts = self.points[idx]
        spread = pts.max(axis=0) - pts.min(axis=0)
        if idx.size <= self.leaf_size or spread.max() == 0.0:
            self.leaves.append(idx)
            return ~(len(self.leaves) - 1)
        dim = int(np.argmax(spread))
        order = np.argsort(pts[:, dim], kind="stable")
        half = idx.size // 2
        threshold = pts[order[half], dim]
        left, right = idx[order[:half]], idx[order[half:]]
        node = len(self._nodes)
        self._nodes.append(None)
        self._nodes[node] = (dim, threshold, self._build(left), self._build(right))
        return node

    def _leaf_of(self, queries):
        out = np.empty(queries.shape[0], dtype=np.int64)
        stack = [(self._root, np.arange(queries.shape[0]))]
        while stack:
            node, sel = stack.pop()
            if node < 0:
                out[sel] = ~node
                continue
            dim, threshold, left, right = self._nodes[node]
            go_left = queries[sel, dim] < threshold
            stack.append((left, sel[go_left]))
            stack.append((right, sel[~go_left]))
        return out

    def query(self, queries, k, exclude=None):
        """k nearest tree points for each query row.

        ``exclude[i]`` names a tree index that query ``i`` must skip (itself,
        for self-queries); -1 excludes nothing.
        """
        queries = as_points(queries)
        if queries.shape[1] != self.points.shape[1]:
            raise ShapeMismatch(f"query dimension {queries.shape[1]} != tree dimension {self.points.shape[1]}")
        m = queries.shape[0]
        excl = np.full(m, -1, dtype=np.int64) if exclude is None else np.asarray(exclude, dtype=np.int64)
        available = self.points.shape[0] - (1 if exclude is not None else 0)
        if k < 1 or k > available:
            raise KTooLarge(f"k={k} exceeds the {available} candidate points")
        out_d = np.empty((m, k))
        out_i = np.empty((m, k), dtype=np.int64)
        group_of = self._leaf_of(queries)
        for g in np.unique(group_of):
            rows = np.flatnonzero(group_of == g)
            q = queries[rows]
            gap = np.maximum(0.0, np.maximum(self.lo - q.max(axis=0), q.min(axis=0) - self.hi))
            box = np.sqrt((gap * gap).sum(axis=1))
            best_d = np.full((rows.size, k), np.inf)
            best_i = np.full((rows.size, k), np.iinfo(np.int64).max)
            for leaf in np.argsort(box, kind="stable"):
                worst = best_d[:, -1].max()
                # slack guards against the box bound rounding above a tied point distance
                if box[leaf] > worst * (1.0 + 1e-12) + 1e-300:
                    break
                members = self.leaves[leaf]
                d = pairwise_distances(q, self.points[members])
                d[members[None, :] == excl[rows][:, None]] = np.inf
                cat_d = np.concatenate([best_d, d], axis=1)
                cat_i = np.concatenate([best_i, np.broadcast_to(members, d.shape)], axis=1)
                order = np.lexsort((cat_i, cat_d), axis=1)[:, :k]
                best_d = np.take_along_axis(cat_d, order, axis=1)
                best_i = np.take_along_axis(cat_i, order, axis=1)
            out_d[rows] = best_d
            out_i[rows] = best_i
        return out_d, out_i

    def query_self(self, k):
        n = self.points.shape[0]
        _check_k(n, k)
        return self.query(self.points, k, exclude=np.arange(n))


def knn_table(points, k, method="brute"):
    if method == "brute":
        return brute_knn(points, k)
    if method == "tree":
        return KDTree(points).query_self(k)
    raise ValueError(f"unknown k-NN method {method!r}")


def brute_kth_distances(points, k):
    """k-th nearest other-point distance for every point, without neighbour indices."""
    pts = as_points(points)
    n = pts.shape[0]
    _check_k(n, k)
    out = np.empty(n)
    for start in range(0, n, _CHUNK):
        stop = min(n, start + _CHUNK)
        d = pairwise_distances(pts[start:stop], pts)
        rows = np.arange(stop - start)
        d[rows, rows + start] = np.inf
        out[start:stop] = np.partition(d, k - 1, axis=1)[:, k - 1]
    return out


def knn_distances_batch(points, k, method="brute"):
    """Distance from every point to its k-th nearest other point."""
    if method == "brute":
        return brute_kth_distances(points, k)
    return knn_table(points, k, method)[0][:, k - 1]


def knn_distance(points, index, k):
    pts = as_points(points)
    n = pts.shape[0]
    _check_k(n, k)
    if not 0 <= index < n:
        raise IndexError(f"index {index} outside [0, {n})")
    d = pairwise_distances(pts[index : index + 1], pts)[0]
    d[index] = np.inf
    return float(np.sort(d, kind="stable")[k - 1])


def knn_query_distances(pool, queries, k):
    """k-th nearest pool distance for points that are not members of the pool."""
    pool = as_points(pool)
    queries = as_points(queries)
    if k < 1 or k > pool.shape[0]:
        raise KTooLarge(f"k={k} exceeds pool size {pool.shape[0]}")
    d = pairwise_distances(queries, pool)
    return np.partition(d, k - 1, axis=1)[:, k - 1]
