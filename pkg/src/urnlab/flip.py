"""Closed forms and flip regions for the three parametric urn families.

* ``two-urn``: two urns, two colors, cyclic;  parameters ``alpha, beta``.
* ``three-urn``: three urns, three colors, cyclic;  ``alpha, beta, gamma``.
* ``n-urn``: n urns, n colors, uniform routing;  ``a_1 .. a_n``.

The vectorised ``*_limits_grid`` / ``*_flags_grid`` helpers take parameter
arrays of any common shape; the scalar functions wrap them.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from typing import Optional, TextIO

import numpy as np

from .errors import UnsupportedFamily
from .model import UrnModel, make_model

TWO_URN = "two-urn"
THREE_URN = "three-urn"
N_URN = "n-urn"
FAMILIES = (TWO_URN, THREE_URN, N_URN)


def _check_open(name, x):
    if not 0.0 < x < 1.0:
        raise ValueError(f"{name} must lie in the open interval (0, 1), got {x!r}")


@dataclass(frozen=True)
class TwoUrnParams:
    alpha: float
    beta: float

    def __post_init__(self):
        _check_open("alpha", self.alpha)
        _check_open("beta", self.beta)


@dataclass(frozen=True)
class ThreeUrnParams:
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            _check_open(name, getattr(self, name))


@dataclass(frozen=True)
class NUrnParams:
    a: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(x) for x in self.a))
        if len(self.a) < 2:
            raise ValueError("the n-urn family needs n >= 2")
        for k, x in enumerate(self.a, 1):
            _check_open(f"a_{k}", x)

    @property
    def n(self) -> int:
        return len(self.a)


# -- two urns ----------------------------------------------------------------

def two_urn_matrices(p: TwoUrnParams) -> list[np.ndarray]:
    a, b = p.alpha, p.beta
    return [np.array([[a, 1 - a], [0.0, 1.0]]), np.array([[1.0, 0.0], [1 - b, b]])]


def two_urn_model(p: TwoUrnParams) -> UrnModel:
    """Cyclic 2x2 model; urn 1 is dominated by color 2, urn 2 by color 1."""
    return make_model(two_urn_matrices(p), dominant=(1, 0))


def two_urn_limits_grid(alpha, beta):
    """Limits with shape ``(..., 2, 2)``: ``[..., urn, color]``."""
    alpha, beta = np.broadcast_arrays(np.asarray(alpha, float), np.asarray(beta, float))
    d = 1 - alpha * beta
    x = np.stack([(alpha - alpha * beta) / d, (1 - alpha) / d], axis=-1)
    y = np.stack([(1 - beta) / d, (beta - alpha * beta) / d], axis=-1)
    return np.stack([x, y], axis=-2)


def two_urn_flags_grid(alpha, beta):
    alpha, beta = np.broadcast_arrays(np.asarray(alpha, float), np.asarray(beta, float))
    rhs = 1 + alpha * beta
    return np.stack([2 * alpha > rhs, 2 * beta > rhs], axis=-1)


def two_urn_limits(p: TwoUrnParams) -> tuple[np.ndarray, np.ndarray]:
    lim = two_urn_limits_grid(p.alpha, p.beta)
    return lim[0], lim[1]


def two_urn_flip(p: TwoUrnParams) -> tuple[bool, bool]:
    f = two_urn_flags_grid(p.alpha, p.beta)
    return bool(f[0]), bool(f[1])


# -- three urns --------------------------------------------------------------

def three_urn_matrices(p: ThreeUrnParams) -> list[np.ndarray]:
    a, b, g = p.alpha, p.beta, p.gamma
    r1 = np.array([[a / 2, a / 2, 1 - a], [a / 2, a / 2, 1 - a], [0.0, 0.0, 1.0]])
    r2 = np.array([[b / 2, 1 - b, b / 2], [0.0, 1.0, 0.0], [b / 2, 1 - b, b / 2]])
    r3 = np.array([[1.0, 0.0, 0.0], [1 - g, g / 2, g / 2], [1 - g, g / 2, g / 2]])
    return [r1, r2, r3]


def three_urn_model(p: ThreeUrnParams) -> UrnModel:
    """Cyclic 3x3 model; urns 1, 2, 3 are dominated by colors 3, 2, 1."""
    return make_model(three_urn_matrices(p), dominant=(2, 1, 0))


def three_urn_limits_grid(alpha, beta, gamma):
    a, b, g = np.broadcast_arrays(*(np.asarray(x, float) for x in (alpha, beta, gamma)))
    abg = a * b * g / 4
    d = 2 + abg
    s1 = (a - a * g / 2 + abg) / d
    s2 = (b - a * b / 2 + abg) / d
    s3 = (g - b * g / 2 + abg) / d
    big1 = (2 - 2 * a + a * g - abg) / d
    big2 = (2 - 2 * b + a * b - abg) / d
    big3 = (2 - 2 * g + b * g - abg) / d
    u1 = np.stack([s1, s1, big1], axis=-1)
    u2 = np.stack([s2, big2, s2], axis=-1)
    u3 = np.stack([big3, s3, s3], axis=-1)
    return np.stack([u1, u2, u3], axis=-2)


def three_urn_flags_grid(alpha, beta, gamma):
    a, b, g = np.broadcast_arrays(*(np.asarray(x, float) for x in (alpha, beta, gamma)))
    abg = a * b * g
    return np.stack(
        [6 * a - 3 * a * g + abg > 4, 6 * b - 3 * a * b + abg > 4, 6 * g - 3 * b * g + abg > 4],
        axis=-1,
    )


def three_urn_limits(p: ThreeUrnParams) -> list[np.ndarray]:
    return list(three_urn_limits_grid(p.alpha, p.beta, p.gamma))


def three_urn_flip(p: ThreeUrnParams) -> tuple[bool, bool, bool]:
    return tuple(bool(x) for x in three_urn_flags_grid(p.alpha, p.beta, p.gamma))


# -- n urns ------------------------------------------------------------------

def n_urn_matrices(p: NUrnParams) -> list[np.ndarray]:
    n = p.n
    out = []
    for i, ai in enumerate(p.a):
        r = ai * np.eye(n)
        r[:, i] = 1 - ai
        r[i] = 0.0
        r[i, i] = 1.0
        out.append(r)
    return out


def n_urn_model(p: NUrnParams) -> UrnModel:
    """Uniformly routed n x n model; urn i is dominated by color i."""
    n = p.n
    return make_model(n_urn_matrices(p), routing=np.full((n, n), 1.0 / n))


def n_urn_limits(p: NUrnParams) -> tuple[np.ndarray, list[np.ndarray]]:
    """``(pi_s, limits)``: the stationary sum vector and ``pi_s @ R_i`` per urn."""
    a = np.array(p.a)
    pi_s = (1 - a) / (p.n - a.sum())
    return pi_s, [pi_s @ r for r in n_urn_matrices(p)]


def n_urn_margins_grid(a):
    """Flip margins for parameter rows ``a`` of shape ``(..., n)``.

    Uses the reduced form of the limits: urn i keeps
    ``(1-a_i)(n-S+a_i)/Z`` of its own color, where ``S = sum(a)`` and
    ``Z = n - S``, and ``a_i (n-1-S+a_i)/Z`` spread over the others.
    """
    a = np.asarray(a, float)
    n = a.shape[-1]
    s = a.sum(axis=-1, keepdims=True)
    z = n - s
    own = (1 - a) * (n - s + a) / z
    rest = a * (n - 1 - s + a) / z
    return rest / (n - 1) - own


def n_urn_excess_grid(a):
    """Left minus right side of every urn's flip inequality, shape ``(..., n)``."""
    a = np.asarray(a, float)
    n = a.shape[-1]
    rest = a.sum(axis=-1, keepdims=True) - a
    return (n * n - 1) * a + (n - 1) * rest - n * a * rest - n * (n - 1)


def n_urn_flags_grid(a):
    return n_urn_excess_grid(a) > 0


def n_urn_flip(p: NUrnParams) -> list[bool]:
    return [bool(x) for x in n_urn_flags_grid(np.array(p.a))]


def n_urn_witness(a):
    """``sum_{i<j} (1-a_i)(1-a_j)``; the summed flip excess equals ``-2n`` times this."""
    b = 1 - np.asarray(a, float)
    s = b.sum(axis=-1)
    return (s * s - (b * b).sum(axis=-1)) / 2


# -- grid scans --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RegionScan:
    family: str
    resolution: int
    names: tuple[str, ...]
    points: np.ndarray  # (K, d), row-major over the grid
    flips: np.ndarray  # (K, m) bool
    margins: np.ndarray  # (K, m)

    @property
    def m(self) -> int:
        return self.flips.shape[1]

    def counts(self) -> dict[str, int]:
        """Number of grid points per flag combination, e.g. ``{"00": 7, "10": 3}``."""
        keys = ["".join("1" if f else "0" for f in row) for row in self.flips]
        return dict(sorted(Counter(keys).items()))

    def header(self) -> list[str]:
        m = self.m
        return [*self.names, *(f"flip_{i}" for i in range(1, m + 1)), *(f"margin_{i}" for i in range(1, m + 1))]

    def write_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(self.header())
        flips = self.flips.astype(int).tolist()
        for pt, fl, mg in zip(self.points.tolist(), flips, self.margins.tolist()):
            w.writerow([*map(repr, pt), *fl, *map(repr, mg)])


def grid_points(resolution: int, dim: int) -> np.ndarray:
    """Cell centres ``(k + 0.5) / resolution`` of the open unit cube, row-major."""
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    axis = (np.arange(resolution) + 0.5) / resolution
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def _margins_from_limits(limits, dominant):
    n = limits.shape[-1]
    idx = np.arange(limits.shape[-2])
    own = limits[..., idx, list(dominant)]
    return (limits.sum(axis=-1) - own) / (n - 1) - own


def scan_region(family: str, resolution: int, n: Optional[int] = None) -> RegionScan:
    """Evaluate flip flags and margins on the interior grid of a family."""
    if family == TWO_URN:
        pts = grid_points(resolution, 2)
        names = ("alpha", "beta")
        flags = two_urn_flags_grid(pts[:, 0], pts[:, 1])
        margins = _margins_from_limits(two_urn_limits_grid(pts[:, 0], pts[:, 1]), (1, 0))
    elif family == THREE_URN:
        pts = grid_points(resolution, 3)
        names = ("alpha", "beta", "gamma")
        flags = three_urn_flags_grid(pts[:, 0], pts[:, 1], pts[:, 2])
        margins = _margins_from_limits(three_urn_limits_grid(pts[:, 0], pts[:, 1], pts[:, 2]), (2, 1, 0))
    elif family == N_URN:
        if n is None or n < 2:
            raise ValueError("the n-urn family needs n >= 2")
        pts = grid_points(resolution, n)
        names = tuple(f"a_{i}" for i in range(1, n + 1))
        flags = n_urn_flags_grid(pts)
        margins = n_urn_margins_grid(pts)
    else:
        raise UnsupportedFamily(f"unknown family {family!r}; expected one of {FAMILIES}")
    return RegionScan(family, resolution, names, pts, flags, margins)


def family_model(family: str, alpha=None, beta=None, gamma=None, a=None) -> UrnModel:
    if family == TWO_URN:
        return two_urn_model(TwoUrnParams(alpha, beta))
    if family == THREE_URN:
        return three_urn_model(ThreeUrnParams(alpha, beta, gamma))
    if family == N_URN:
        return n_urn_model(NUrnParams(tuple(a)))
    raise UnsupportedFamily(f"unknown family {family!r}; expected one of {FAMILIES}")
