"""Dense stochastic-matrix kernel.

Matrices are plain ``numpy`` arrays.  Anything returned by
:func:`validate_stochastic` (or built from validated inputs by the functions
in this module) is a read-only float64 array whose rows sum to one.
"""

from __future__ import annotations

from collections import deque
from math import gcd
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    NegativeEntry,
    NoConvergence,
    ReducibleMatrix,
    RowSumOutOfTolerance,
)

ROW_TOL = 1e-9
VEC_TOL = 1e-12
ZERO_TOL = 0.0
EIG_TOL = 1e-12
MAX_ITER = 10**6

__all__ = [
    "ROW_TOL",
    "VEC_TOL",
    "ZERO_TOL",
    "EIG_TOL",
    "MAX_ITER",
    "as_square",
    "validate_stochastic",
    "product",
    "cyclic_products",
    "strongly_connected_components",
    "is_irreducible",
    "period",
    "build_combined_cyclic",
    "build_combined_routed",
    "perron_left_vector",
    "irreducible_via_products",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def as_square(m) -> np.ndarray:
    """Return `m` as a float64 square matrix with finite entries."""
    a = np.array(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def validate_stochastic(m, tol: float = ROW_TOL) -> np.ndarray:
    """Check that `m` is row-stochastic and return an exactly balanced copy.

    Parameters
    ----------
    m : array_like, shape (n, n)
        Candidate matrix.
    tol : float
        Maximum allowed deviation of each raw row sum from 1.

    Returns
    -------
    ndarray
        Read-only copy of `m` with every row divided by its sum.

    Raises
    ------
    NegativeEntry
        For the first negative entry in row-major order.
    RowSumOutOfTolerance
        For the first row whose sum is further than `tol` from 1.
    """
    a = as_square(m)
    neg = np.argwhere(a < 0)
    if len(neg):
        r, c = (int(x) for x in neg[0])
        raise NegativeEntry(r, c, float(a[r, c]))
    sums = a.sum(axis=1)
    for r, s in enumerate(sums):
        if abs(s - 1.0) > tol:
            raise RowSumOutOfTolerance(r, float(s))
    return _frozen(a / sums[:, None])


def _check_orders(mats: Sequence[np.ndarray]) -> int:
    if len(mats) == 0:
        raise DimensionMismatch("need at least one matrix")
    n = mats[0].shape[0]
    for k, a in enumerate(mats):
        if a.shape != (n, n):
            raise DimensionMismatch(f"matrix {k} has shape {a.shape}, expected {(n, n)}")
    return n


def product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of two stochastic matrices (stochastic by closure)."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    _check_orders([a, b])
    out = a @ b
    if __debug__:
        assert np.allclose(out.sum(axis=1), 1.0, rtol=0, atol=1e-9), "product lost row balance"
    return _frozen(out)


def cyclic_products(rs: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Products ``R_{i+1} ... R_m R_1 ... R_i`` for i = 1..m.

    Element ``i`` (0-based) of the result is the product that starts right
    after ``rs[i]`` and wraps around to end with ``rs[i]``; its left Perron
    vector is urn ``i``'s limit under cyclic interaction.
    """
    rs = [np.asarray(r, dtype=np.float64) for r in rs]
    n = _check_orders(rs)
    m = len(rs)
    out = []
    for i in range(m):
        acc = np.eye(n)
        for k in range(1, m + 1):
            acc = product(acc, rs[(i + k) % m])
        out.append(acc)
    return out


def strongly_connected_components(adj: np.ndarray) -> list[list[int]]:
    """Strongly connected components of the digraph with adjacency `adj`.

    Iterative Tarjan; ``adj[i, j]`` truthy means an edge ``i -> j``.
    Components are returned in reverse topological order.
    """
    adj = np.asarray(adj, dtype=bool)
    n = adj.shape[0]
    succ = [np.flatnonzero(adj[v]).tolist() for v in range(n)]
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] >= 0:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, pos = work[-1]
            if pos < len(succ[v]):
                work[-1] = (v, pos + 1)
                w = succ[v][pos]
                if index[w] < 0:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
    return comps


def _pattern(m) -> np.ndarray:
    return np.asarray(m) > ZERO_TOL


def is_irreducible(m) -> bool:
    """True iff the positivity digraph of `m` is strongly connected."""
    a = np.asarray(m)
    if a.shape[0] == 1:
        return True
    return len(strongly_connected_components(_pattern(a))) == 1


def period(m) -> int:
    """Period of an irreducible non-negative matrix (gcd of its cycle lengths)."""
    adj = _pattern(m)
    n = adj.shape[0]
    level = [-1] * n
    level[0] = 0
    queue = deque([0])
    d = 0
    while queue:
        v = queue.popleft()
        for w in np.flatnonzero(adj[v]):
            if level[w] < 0:
                level[w] = level[v] + 1
                queue.append(w)
            else:
                d = gcd(d, level[v] + 1 - level[w])
    return d if d > 0 else 1


def build_combined_cyclic(rs: Sequence[np.ndarray]) -> np.ndarray:
    """Block matrix of the cyclic scheme: ``R_{i+1}`` in block (i, i+1 mod m)."""
    rs = [np.asarray(r, dtype=np.float64) for r in rs]
    n = _check_orders(rs)
    m = len(rs)
    if m == 1:
        return _frozen(rs[0].copy())
    out = np.zeros((n * m, n * m))
    for i in range(m):
        j = (i + 1) % m
        out[i * n:(i + 1) * n, j * n:(j + 1) * n] = rs[j]
    return _frozen(out)


def build_combined_routed(rs: Sequence[np.ndarray], p) -> np.ndarray:
    """Block matrix of the routed scheme: block (i, j) is ``p[i, j] * R_j``."""
    rs = [np.asarray(r, dtype=np.float64) for r in rs]
    n = _check_orders(rs)
    m = len(rs)
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (m, m):
        raise DimensionMismatch(f"routing matrix has shape {p.shape}, expected {(m, m)}")
    out = np.zeros((n * m, n * m))
    for i in range(m):
        for j in range(m):
            out[i * n:(i + 1) * n, j * n:(j + 1) * n] = p[i, j] * rs[j]
    return _frozen(out)


def _residual(pi: np.ndarray, a: np.ndarray) -> float:
    return float(np.max(np.abs(pi @ a - pi)))


def _accept(pi: np.ndarray, a: np.ndarray) -> bool:
    return pi.min() > 0 and _residual(pi, a) <= EIG_TOL


def _direct(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    lhs = a.T - np.eye(n)
    lhs[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    pi = np.linalg.solve(lhs, rhs)
    # one step of iterative refinement
    r = rhs - lhs @ pi
    pi = pi + np.linalg.solve(lhs, r)
    return pi / pi.sum()


def _power(a: np.ndarray, max_iter: int) -> np.ndarray:
    # Cesaro average over a window of one period: exact for the periodic
    # part of the spectrum, so convergence stays geometric.
    n = a.shape[0]
    d = period(a)
    x = np.full(n, 1.0 / n)
    window = deque([x], maxlen=d)
    res = np.inf
    for it in range(1, max_iter + 1):
        x = x @ a
        x /= x.sum()
        window.append(x)
        if it % d == 0 or it == max_iter:
            avg = np.mean(window, axis=0)
            avg /= avg.sum()
            res = _residual(avg, a)
            if res <= EIG_TOL and avg.min() > 0:
                return avg
    raise NoConvergence(max_iter, res)


def perron_left_vector(m, method: str = "direct", max_iter: int = MAX_ITER) -> np.ndarray:
    """Left Perron vector of an irreducible stochastic matrix.

    Parameters
    ----------
    m : array_like, shape (n, n)
        Irreducible row-stochastic matrix.
    method : {"direct", "power"}
        ``"direct"`` solves ``pi (M - I) = 0, sum(pi) = 1`` by elimination and
        falls back to power iteration if the result misses the residual
        tolerance; ``"power"`` goes straight to the iteration.
    max_iter : int
        Iteration cap for the power method.

    Returns
    -------
    ndarray, shape (n,)
        Strictly positive probability vector with ``pi @ m == pi`` to within
        ``EIG_TOL`` in the max norm.

    Raises
    ------
    ReducibleMatrix
        If `m` is reducible (the Perron vector need not be unique or positive).
    NoConvergence
        If the power iteration misses the tolerance after `max_iter` steps.
    """
    a = np.asarray(m, dtype=np.float64)
    if not is_irreducible(a):
        raise ReducibleMatrix("Perron vector requested for a reducible matrix")
    if method not in ("direct", "power"):
        raise ValueError(f"unknown method {method!r}")
    if method == "direct":
        try:
            pi = _direct(a)
        except np.linalg.LinAlgError:
            pi = None
        if pi is not None and _accept(pi, a):
            return _frozen(pi)
    return _frozen(_power(a, max_iter))


def irreducible_via_products(rs: Sequence[np.ndarray]) -> bool:
    """Irreducibility of the cyclic block matrix, decided through its cyclic products."""
    return all(is_irreducible(c) for c in cyclic_products(rs))
