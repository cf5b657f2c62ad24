"""Multi-occupation fields of piecewise-constant loops.

The length-n occupation value of a loop against an indicator pattern is the
sum over the n cyclic rotations of the pattern of the ordered-simplex
integral of the indicator product along the loop.  For a piecewise-constant
loop the integral decomposes exactly over runs of pattern positions placed
in single segments: a run of m positions inside a segment of hold tau
contributes tau^m / m!.  The dynamic program below sweeps segments once per
rotation, giving O(n^2 p) work for an n-pattern over a p-segment word.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .loops import Loop
from .spaces import State, StateSpace


@dataclass(frozen=True)
class Box:
    """Axis-aligned half-open box [lo, hi) used as a Euclidean pattern cell."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise DomainError("box lo/hi dimension mismatch")
        for a, (x, y) in enumerate(zip(self.lo, self.hi)):
            if not (x < y):
                raise DomainError(f"box axis {a} needs min < max, got [{x}, {y})")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains(self, point: tuple[float, ...]) -> bool:
        return all(x <= p < y for p, x, y in zip(point, self.lo, self.hi))

    def disjoint_from(self, other: "Box") -> bool:
        for a in range(self.dim):
            if self.hi[a] <= other.lo[a] or other.hi[a] <= self.lo[a]:
                return True
        return False


PatternCell = object  # str label or Box


@dataclass(frozen=True)
class Pattern:
    """A finite tuple of pattern cells, all labels or all boxes."""

    cells: tuple[PatternCell, ...]

    def __post_init__(self):
        if len(self.cells) < 1:
            raise DomainError("patterns must have length >= 1")
        kinds = {isinstance(c, Box) for c in self.cells}
        if len(kinds) > 1:
            raise DomainError("pattern mixes labels and boxes")
        if isinstance(self.cells[0], Box):
            d = self.cells[0].dim
            if any(c.dim != d for c in self.cells):
                raise DomainError("pattern boxes have mixed dimensions")

    def __len__(self) -> int:
        return len(self.cells)


def rotate_pattern(p: Pattern, j: int) -> Pattern:
    """Cyclic left shift by j: (z1,...,zn) -> (z_{1+j},...,zn,z1,...,z_j)."""
    n = len(p)
    if not (0 <= j < n):
        raise DomainError(f"rotation index {j} outside [0, {n})")
    return Pattern(p.cells[j:] + p.cells[:j])


def _cell_matcher(space: StateSpace, cell: PatternCell):
    if space.kind == "finite":
        if isinstance(cell, Box):
            raise DomainError("box pattern cell over a finite space")
        space.validate_state(cell)
        return lambda s: s == cell
    if not isinstance(cell, Box):
        raise DomainError("euclidean patterns use boxes")
    if cell.dim != space.dim:
        raise DomainError(f"box dimension {cell.dim} != space dimension {space.dim}")
    return cell.contains


def _match_matrix(loop: Loop, pattern: Pattern) -> list[list[bool]]:
    """match[k][i] is true when segment i's state lies in pattern cell k."""
    matchers = [_cell_matcher(loop.space, c) for c in pattern.cells]
    states = loop.states()
    return [[m(s) for s in states] for m in matchers]


def _simplex_integral(taus: list[float], rows: list[list[bool]]) -> float:
    """Ordered-simplex integral of one (rotated) pattern along a segment list.

    G[k][i] integrates positions k..n-1 over segments i..p-1; runs of length
    m inside segment i weigh tau_i^m / m!.
    """
    n = len(rows)
    p = len(taus)
    G = [[0.0] * (p + 1) for _ in range(n + 1)]
    G[n] = [1.0] * (p + 1)
    for i in range(p - 1, -1, -1):
        tau = taus[i]
        for k in range(n - 1, -1, -1):
            acc = G[k][i + 1]
            if rows[k][i]:
                term = 1.0
                m = 0
                while k + m < n and rows[k + m][i]:
                    m += 1
                    term *= tau / m
                    acc += term * G[k + m][i + 1]
            G[k][i] = acc
    return G[0][0]


def multi_occupation(l: Loop, p: Pattern) -> float:
    """Exact occupation value: the rotation sum of ordered-simplex integrals.

    The word may be cut anywhere; the rotation sum does not depend on the cut.
    """
    rows = _match_matrix(l, p)
    taus = l.holds()
    n = len(p)
    parts = []
    for j in range(n):
        rotated = [rows[(k + j) % n] for k in range(n)]
        parts.append(_simplex_integral(taus, rotated))
    return math.fsum(parts)


@dataclass(frozen=True)
class OccupationMeasure:
    """Time spent by a loop in each visited state or cell."""

    space: StateSpace
    entries: dict
    total: float

    def __post_init__(self):
        for key, val in self.entries.items():
            if not (val > 0):
                raise DomainError(f"occupation of {key!r} must be positive")
        s = math.fsum(self.entries.values())
        if abs(s - self.total) > 8 * np.spacing(max(s, 1.0)):
            raise DomainError("total does not match the entry sum")


def occupation_measure(l: Loop, cells=None) -> OccupationMeasure:
    """One-point occupation times, per state or per provided disjoint cell."""
    acc: dict = {}
    if cells is None:
        for seg in l.word:
            acc[seg.state] = acc.get(seg.state, 0.0) + seg.hold
    else:
        cells = list(cells)
        for a in range(len(cells)):
            for b in range(a + 1, len(cells)):
                ca, cb = cells[a], cells[b]
                if isinstance(ca, Box) and isinstance(cb, Box):
                    if not ca.disjoint_from(cb):
                        raise DomainError(f"cells {a} and {b} overlap")
                elif ca == cb:
                    raise DomainError(f"cells {a} and {b} are equal")
        matchers = [(c, _cell_matcher(l.space, c)) for c in cells]
        for seg in l.word:
            for cell, m in matchers:
                if m(seg.state):
                    acc[cell] = acc.get(cell, 0.0) + seg.hold
                    break
    total = math.fsum(acc.values())
    return OccupationMeasure(l.space, acc, total)


def monte_carlo_occupation(
    l: Loop, p: Pattern, samples: int, seed: int, chunk: int = 1_000_000
) -> tuple[float, float]:
    """Monte Carlo estimate of the occupation value, with its standard error.

    Draws n i.i.d. uniform times on [0, t], sorts them, sums the rotated
    indicator products, and scales the mean by t^n / n!.
    """
    if samples < 1:
        raise DomainError("samples must be >= 1")
    n = len(p)
    t = l.duration
    bounds = np.asarray(l.boundaries()[1:])
    rows = _match_matrix(l, p)
    M = np.asarray(rows, dtype=float)  # (n cells, p segments)
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    remaining = samples
    nseg = len(l.word)
    while remaining > 0:
        m = min(chunk, remaining)
        remaining -= m
        u = rng.random((m, n)) * t
        u.sort(axis=1)
        seg = np.searchsorted(bounds, u, side="right")
        np.clip(seg, 0, nseg - 1, out=seg)
        x = np.zeros(m)
        for j in range(n):
            acc = np.ones(m)
            for k in range(n):
                acc *= M[(k + j) % n][seg[:, k]]
            x += acc
        total += float(x.sum())
        total_sq += float((x * x).sum())
    scale = t**n / math.factorial(n)
    mean = total / samples
    estimate = mean * scale
    if samples > 1:
        var = max(total_sq - samples * mean * mean, 0.0) / (samples - 1)
        stderr = math.sqrt(var / samples) * scale
    else:
        stderr = 0.0
    return estimate, stderr
