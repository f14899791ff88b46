"""Exact brute-force k-nearest-neighbour search (Euclidean, ties by row id)."""

from __future__ import annotations

import numpy as np

from .errors import InputShapeError, ParameterError

# rows of the query block processed per distance-matrix chunk
_CHUNK = 512


class NeighborIndex:
    """Immutable store of reference points with row ids ``0..n-1``."""

    def __init__(self, points):
        points = np.array(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[0] == 0:
            raise InputShapeError(f"index needs a non-empty (n, d) array, got {points.shape}")
        if np.isnan(points).any():
            raise ParameterError("index points contain NaN")
        points.setflags(write=False)
        self.points = points
        self.row_ids = np.arange(points.shape[0])

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]

    def _check_k(self, k):
        if not 1 <= k <= self.n:
            raise ParameterError(f"k must satisfy 1 <= k <= {self.n}, got {k}")

    def query(self, queries, k):
        """Neighbours for a batch of queries.

        Returns ``(ids, distances)``, both ``(m, k)``, sorted by ascending
        distance with equal distances ordered by ascending row id.
        """
        k = int(k)
        self._check_k(k)
        Q = np.asarray(queries, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[1] != self.d:
            raise InputShapeError(f"queries have shape {Q.shape}, index has {self.d} features")
        ids = np.empty((Q.shape[0], k), dtype=np.int64)
        sq = np.empty((Q.shape[0], k))
        for start in range(0, Q.shape[0], _CHUNK):
            block = Q[start:start + _CHUNK]
            diff = block[:, None, :] - self.points[None, :, :]
            d2 = np.sum(diff * diff, axis=2)
            # stable sort keeps lower row ids first among exact ties
            order = np.argsort(d2, axis=1, kind="stable")[:, :k]
            ids[start:start + len(block)] = order
            sq[start:start + len(block)] = np.take_along_axis(d2, order, axis=1)
        return ids, np.sqrt(sq)


def knn(index, query, k):
    """``(ids, distances)`` of the ``k`` nearest rows to one query vector."""
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != index.d:
        raise InputShapeError(f"query has shape {q.shape}, index has {index.d} features")
    ids, dist = index.query(q.reshape(1, -1), k)
    return ids[0], dist[0]
