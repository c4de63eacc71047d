"""Seeded Monte Carlo engine for the cyclic and routed urn processes.

Random numbers come from numpy's PCG64 bit generator.  Every categorical
draw (a ball color, or a target urn under routing) consumes exactly one
uniform double and is resolved by inverting the cumulative masses, so a
trajectory is a pure function of ``(model, seed)``.  Replicate ``r`` of a
batch seeded with ``master`` uses seed ``splitmix64(master + r)``.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, TextIO

import numpy as np

from .errors import EmptyComposition
from .model import UrnModel, theoretical_limits

try:
    from numba import njit
except ImportError:  # pragma: no cover
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

MASK64 = (1 << 64) - 1
CHUNK_ROUNDS = 1 << 15
CSV_HEADER = ("round", "urn", "color", "proportion", "mass")


def splitmix64(x: int) -> int:
    """One SplitMix64 output for state `x` (used to derive replicate seeds)."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def replicate_seed(master_seed: int, replicate: int) -> int:
    return splitmix64((master_seed + replicate) & MASK64)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class SimConfig:
    rounds: int
    seed: int = 0
    snapshot_stride: Optional[int] = None

    def __post_init__(self):
        if self.rounds < 0:
            raise ValueError("rounds must be non-negative")
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.snapshot_stride is not None:
            if self.snapshot_stride < 1:
                raise ValueError("snapshot_stride must be positive")
            if self.rounds > 0 and self.snapshot_stride > self.rounds:
                raise ValueError("snapshot_stride cannot exceed rounds")

    @property
    def stride(self) -> int:
        return self.snapshot_stride or max(self.rounds, 1)

    def snapshot_rounds(self) -> list[int]:
        if self.rounds == 0:
            return [0]
        out = list(range(self.stride, self.rounds + 1, self.stride))
        if out[-1] != self.rounds:
            out.append(self.rounds)
        return out


@dataclass(frozen=True, eq=False)
class Snapshot:
    round: int
    raw: np.ndarray  # (m, N) masses

    @property
    def proportions(self) -> np.ndarray:
        return self.raw / self.raw.sum(axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    rounds: int
    master_seed: int
    seeds: list[int]
    limits: list[np.ndarray]
    distances: np.ndarray  # (replicates, m) final-round L-inf distances
    mean: np.ndarray = field(init=False)
    max: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "mean", self.distances.mean(axis=0))
        object.__setattr__(self, "max", self.distances.max(axis=0))

    @property
    def replicates(self) -> int:
        return self.distances.shape[0]

    def to_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "replicates": self.replicates,
            "master_seed": self.master_seed,
            "seeds": self.seeds,
            "limits": [p.tolist() for p in self.limits],
            "mean_distance": self.mean.tolist(),
            "max_distance": self.max.tolist(),
            "distances": self.distances.tolist(),
        }


# -- categorical draws -------------------------------------------------------

@njit(cache=True, nogil=True)
def _invert(masses, u):
    total = 0.0
    for c in range(masses.shape[0]):
        total += masses[c]
    target = u * total
    acc = 0.0
    last = -1
    for c in range(masses.shape[0]):
        if masses[c] > 0.0:
            acc += masses[c]
            last = c
            if target < acc:
                return c
    return last


def draw_color(c, rng: np.random.Generator) -> int:
    """Draw a color with probability proportional to its mass in `c`."""
    c = np.asarray(c, dtype=np.float64)
    if not c.sum() > 0:
        raise EmptyComposition("cannot draw from an empty composition")
    return int(_invert(c, rng.random()))


# -- kernels -----------------------------------------------------------------

@njit(cache=True, nogil=True)
def _advance_cyclic(masses, rs, u):
    m = masses.shape[0]
    for t in range(u.shape[0]):
        for i in range(m):
            c = _invert(masses[i], u[t, i])
            j = (i + 1) % m
            masses[j] += rs[j, c]


@njit(cache=True, nogil=True)
def _advance_routed(masses, rs, p, u):
    m = masses.shape[0]
    for t in range(u.shape[0]):
        for i in range(m):
            c = _invert(masses[i], u[t, i, 0])
            j = _invert(p[i], u[t, i, 1])
            masses[j] += rs[j, c]


def step_round_cyclic(state: Sequence, rs: Sequence, rng: np.random.Generator) -> list[np.ndarray]:
    """One full cyclic round: urn i's drawn color reinforces urn i+1 (mod m)."""
    state = [np.array(c, dtype=np.float64) for c in state]
    m = len(state)
    for i in range(m):
        c = draw_color(state[i], rng)
        j = (i + 1) % m
        state[j] += np.asarray(rs[j])[c]
    return state


def step_round_routed(state: Sequence, rs: Sequence, p, rng: np.random.Generator) -> list[np.ndarray]:
    """One full routed round: urn i's drawn color reinforces an urn drawn from row i of `p`."""
    state = [np.array(c, dtype=np.float64) for c in state]
    p = np.asarray(p, dtype=np.float64)
    for i in range(len(state)):
        c = draw_color(state[i], rng)
        j = draw_color(p[i], rng)
        state[j] += np.asarray(rs[j])[c]
    return state


def _advance(model: UrnModel, masses, rs, rng, rounds: int) -> None:
    m = model.m
    while rounds > 0:
        k = min(rounds, CHUNK_ROUNDS)
        if model.routing is None:
            _advance_cyclic(masses, rs, rng.random((k, m)))
        else:
            _advance_routed(masses, rs, np.ascontiguousarray(model.routing), rng.random((k, m, 2)))
        rounds -= k


def run_trajectory(model: UrnModel, cfg: SimConfig) -> list[Snapshot]:
    """Simulate `cfg.rounds` rounds and return the snapshots.

    A snapshot is taken after every `cfg.stride` rounds and after the final
    round; with zero rounds the only snapshot is the initial state.
    """
    rng = make_rng(cfg.seed)
    masses = np.array(model.initial, dtype=np.float64)
    rs = np.ascontiguousarray(np.array(model.replacements))
    snaps = []
    done = 0
    for r in cfg.snapshot_rounds():
        _advance(model, masses, rs, rng, r - done)
        done = r
        raw = masses.copy()
        raw.setflags(write=False)
        snaps.append(Snapshot(r, raw))
    return snaps


def final_state(model: UrnModel, rounds: int, seed: int) -> np.ndarray:
    return run_trajectory(model, SimConfig(rounds, seed))[-1].raw


def convergence_report(
    model: UrnModel,
    rounds: int,
    replicates: int,
    master_seed: int,
    workers: int = 1,
) -> ConvergenceReport:
    """Run independent replicates and measure their distance to the limits.

    Replicate ``r`` is seeded with ``replicate_seed(master_seed, r)``.  The
    kernels release the GIL, so ``workers > 1`` runs replicates on threads;
    results are gathered by replicate index either way.
    """
    if replicates < 1:
        raise ValueError("replicates must be positive")
    limits = theoretical_limits(model)
    target = np.array(limits)
    seeds = [replicate_seed(master_seed, r) for r in range(replicates)]

    def one(seed):
        raw = final_state(model, rounds, seed)
        props = raw / raw.sum(axis=1, keepdims=True)
        return np.abs(props - target).max(axis=1)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            dists = list(pool.map(one, seeds))
    else:
        dists = [one(s) for s in seeds]
    return ConvergenceReport(rounds, master_seed, seeds, limits, np.array(dists))


def trajectory_rows(snapshots: Iterable[Snapshot]):
    """Yield CSV rows ``(round, urn, color, proportion, mass)``, 1-based urn/color."""
    for s in snapshots:
        props = s.proportions
        for i in range(s.raw.shape[0]):
            for c in range(s.raw.shape[1]):
                yield (s.round, i + 1, c + 1, repr(float(props[i, c])), repr(float(s.raw[i, c])))


def write_trajectory_csv(snapshots: Iterable[Snapshot], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    w.writerows(trajectory_rows(snapshots))
