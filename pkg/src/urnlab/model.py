"""Interacting urn model definition, validation and limit profile."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from . import matrix as mx
from .errors import (
    DimensionMismatch,
    EmptyUrn,
    InvalidRouting,
    ReducibleCombinedMatrix,
    SingleColor,
    UrnError,
)

CYCLIC = "cyclic"
ROUTED = "routed"


@dataclass(frozen=True, eq=False)
class UrnModel:
    """A validated interacting urn model.

    Colors and urns are 0-based here.  ``routing`` is ``None`` for the cyclic
    scheme (urn ``i`` feeds urn ``i+1 mod m`` through that urn's replacement
    matrix) and an ``m x m`` stochastic matrix for the routed scheme.
    """

    replacements: tuple[np.ndarray, ...]
    initial: tuple[np.ndarray, ...]
    dominant: Optional[tuple[int, ...]]
    routing: Optional[np.ndarray]
    combined: np.ndarray

    @property
    def m(self) -> int:
        return len(self.replacements)

    @property
    def n_colors(self) -> int:
        return self.replacements[0].shape[0]

    @property
    def scheme(self) -> str:
        return CYCLIC if self.routing is None else ROUTED


def _composition(c, n_colors: int, urn: int) -> np.ndarray:
    a = np.array(c, dtype=np.float64)
    if a.shape != (n_colors,):
        raise DimensionMismatch(f"initial composition of urn {urn} has shape {a.shape}, expected ({n_colors},)")
    if not np.all(np.isfinite(a)) or np.any(a < 0):
        raise UrnError(f"initial composition of urn {urn} has negative or non-finite mass")
    if a.sum() < 1.0:
        raise EmptyUrn(urn, float(a.sum()))
    a.setflags(write=False)
    return a


def make_model(
    replacements: Sequence,
    routing=None,
    initial: Optional[Sequence] = None,
    dominant: Optional[Sequence[int]] = None,
) -> UrnModel:
    """Validate the pieces of a model and assemble an :class:`UrnModel`.

    `dominant` is 0-based.  When omitted it defaults to color ``i`` for urn
    ``i`` if there are as many urns as colors (and to color 0 when there is a
    single color); otherwise it must be given.  `initial` defaults to one unit
    of the dominant color in every urn.
    """
    if len(replacements) == 0:
        raise DimensionMismatch("need at least one urn")
    rs = tuple(mx.validate_stochastic(r) for r in replacements)
    m = len(rs)
    n = rs[0].shape[0]
    for i, r in enumerate(rs):
        if r.shape != (n, n):
            raise DimensionMismatch(f"replacement matrix {i} has shape {r.shape}, expected {(n, n)}")

    if routing is not None:
        p = np.asarray(routing, dtype=np.float64)
        if p.shape != (m, m):
            raise InvalidRouting(f"routing matrix has shape {p.shape}, expected {(m, m)}")
        try:
            routing = mx.validate_stochastic(p)
        except UrnError as exc:
            raise InvalidRouting(f"routing matrix is not stochastic: {exc}") from exc

    if dominant is None:
        if n == 1:
            dominant = (0,) * m
        elif m == n:
            dominant = tuple(range(m))
    else:
        dominant = tuple(int(d) for d in dominant)
        if len(dominant) != m:
            raise DimensionMismatch(f"dominant map has {len(dominant)} entries for {m} urns")
        for i, d in enumerate(dominant):
            if not 0 <= d < n:
                raise UrnError(f"dominant color {d} of urn {i} out of range")

    if initial is None:
        if dominant is None:
            raise UrnError("dominant colors are required when urn and color counts differ")
        initial = [np.eye(n)[d] for d in dominant]
    if len(initial) != m:
        raise DimensionMismatch(f"{len(initial)} initial compositions for {m} urns")
    init = tuple(_composition(c, n, i) for i, c in enumerate(initial))

    if routing is None:
        combined = mx.build_combined_cyclic(rs)
    else:
        combined = mx.build_combined_routed(rs, routing)
    if not mx.is_irreducible(combined):
        raise ReducibleCombinedMatrix("combined replacement matrix is reducible")

    return UrnModel(rs, init, dominant, routing, combined)


def validate_model(raw: Mapping[str, Any]) -> UrnModel:
    """Build a model from a JSON-style description.

    Keys: ``replacements`` (required), ``scheme`` (``"cyclic"`` or
    ``"routed"``), ``routing`` (required iff routed), ``initial``,
    ``dominant`` (1-based color numbers), and optional ``m`` / ``N`` that are
    checked against the matrices.  Unknown keys are ignored.
    """
    if "replacements" not in raw:
        raise UrnError("model description has no 'replacements'")
    reps = raw["replacements"]
    scheme = raw.get("scheme", ROUTED if raw.get("routing") is not None else CYCLIC)
    if scheme not in (CYCLIC, ROUTED):
        raise UrnError(f"unknown scheme {scheme!r}")
    routing = raw.get("routing")
    if scheme == ROUTED and routing is None:
        raise InvalidRouting("routed scheme needs a routing matrix")
    if scheme == CYCLIC and routing is not None:
        raise InvalidRouting("cyclic scheme takes no routing matrix")

    try:
        shapes = [np.shape(r) for r in reps]
    except ValueError as exc:
        raise DimensionMismatch(f"ragged replacement matrix: {exc}") from exc
    if "m" in raw and raw["m"] != len(reps):
        raise DimensionMismatch(f"m = {raw['m']} but {len(reps)} replacement matrices given")
    if "N" in raw and any(s != (raw["N"], raw["N"]) for s in shapes):
        raise DimensionMismatch(f"N = {raw['N']} but replacement shapes are {shapes}")

    dominant = raw.get("dominant")
    if dominant is not None:
        dominant = [int(d) - 1 for d in dominant]
    return make_model(reps, routing=routing, initial=raw.get("initial"), dominant=dominant)


def model_to_document(model: UrnModel) -> dict:
    """Inverse of :func:`validate_model` (1-based dominant colors)."""
    doc = {
        "m": model.m,
        "N": model.n_colors,
        "scheme": model.scheme,
        "replacements": [r.tolist() for r in model.replacements],
        "initial": [c.tolist() for c in model.initial],
    }
    if model.routing is not None:
        doc["routing"] = model.routing.tolist()
    if model.dominant is not None:
        doc["dominant"] = [d + 1 for d in model.dominant]
    return doc


def theoretical_limits(model: UrnModel) -> list[np.ndarray]:
    """Almost-sure limit of every urn's proportion vector.

    Cyclic scheme: urn ``i`` converges to the Perron vector of the cyclic
    product ending in ``R_i``.  Routed scheme: the Perron vector of the
    routed block matrix, cut into per-urn blocks, each rescaled to sum one.
    """
    if model.routing is None:
        return [mx.perron_left_vector(c) for c in mx.cyclic_products(model.replacements)]
    pi = mx.perron_left_vector(model.combined)
    n = model.n_colors
    out = []
    for i in range(model.m):
        block = pi[i * n:(i + 1) * n].copy()
        block /= block.sum()
        block.setflags(write=False)
        out.append(block)
    return out


def flip_predicate(p, dominant: int) -> tuple[bool, float]:
    """Whether the dominant color has fallen below the mean of the others.

    Returns ``(flipped, margin)`` with ``margin = mean(others) - p[dominant]``;
    an exact tie is not a flip.
    """
    p = np.asarray(p, dtype=np.float64)
    n = p.shape[0]
    if n < 2:
        raise SingleColor("flip is undefined for a single color")
    margin = float((p.sum() - p[dominant]) / (n - 1) - p[dominant])
    return margin > 0, margin


def flip_profile(model: UrnModel, limits: Sequence[np.ndarray]):
    """Per-urn ``(flags, margins)``; ``None`` entries when flips are undefined."""
    if model.n_colors < 2 or model.dominant is None:
        return [None] * model.m, [None] * model.m
    pairs = [flip_predicate(p, d) for p, d in zip(limits, model.dominant)]
    return [f for f, _ in pairs], [g for _, g in pairs]
