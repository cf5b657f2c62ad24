"""Partition, time change, induced discrete loop, and the convergence ladder.

The pipeline collapses a loop onto a finite alphabet: build cells of small
diameter at positive mutual distance around the loop's occupation support,
run the clock only while the path is inside the cell union, and relabel by
cell representatives.  Occupation values of cell tuples are preserved
exactly, and for two rotation-equivalent inputs the induced loops agree up
to a rotation whose time offset can be pulled back to the original clock.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .errors import ConstructionError, DomainError
from .loops import (
    BasedLoop,
    EquivalenceReport,
    Loop,
    Segment,
    based_segments,
    equals_up_to_rotation,
    evaluate,
)
from .occupation import Box, OccupationMeasure, Pattern, multi_occupation
from .spaces import StateSpace


@dataclass(frozen=True)
class Partition:
    """Disjoint small-diameter cells with designated representatives.

    Euclidean partitions carry margin-shrunk grid boxes; finite-alphabet
    partitions use each kept label as its own cell.  ``induced_space`` is
    the finite space the induced loops live on: one label per cell, with
    distances inherited from the representatives.
    """

    space: StateSpace
    cells: tuple
    representatives: tuple
    labels: tuple[str, ...]
    epsilon: float
    margin: float
    induced_space: StateSpace

    def locate(self, state) -> int | None:
        """Index of the cell containing the state, or None."""
        if self.space.kind == "finite":
            for i, cell in enumerate(self.cells):
                if state == cell:
                    return i
            return None
        for i, cell in enumerate(self.cells):
            if cell.contains(state):
                return i
        return None

    def touches_boundary(self, state) -> bool:
        if self.space.kind == "finite":
            return False
        for cell in self.cells:
            for a in range(cell.dim):
                if state[a] == cell.lo[a] or state[a] == cell.hi[a]:
                    return True
        return False

    def representative_of(self, label: str):
        return self.representatives[self.labels.index(label)]


def _partition_postconditions(part: Partition, m: OccupationMeasure):
    eps = part.epsilon
    for cell in part.cells:
        diam = math.dist(cell.lo, cell.hi)
        assert diam < eps, "cell diameter must stay below epsilon"
    for i in range(len(part.cells)):
        for j in range(i + 1, len(part.cells)):
            a, b = part.cells[i], part.cells[j]
            gap = math.sqrt(
                sum(
                    max(a.lo[k] - b.hi[k], b.lo[k] - a.hi[k], 0.0) ** 2
                    for k in range(a.dim)
                )
            )
            assert gap >= 2 * part.margin - 1e-12, "cells must keep their distance"
    leaked = math.fsum(
        w for pt, w in m.entries.items() if part.locate(pt) is None
    )
    assert leaked <= 2 * eps * m.total + 1e-12, "leaked mass exceeds the bound"
    for cell, rep in zip(part.cells, part.representatives):
        assert cell.contains(rep), "representative must lie in its cell"


def build_partition(m: OccupationMeasure, eps: float, seed: int) -> Partition:
    """Grid cells of side eps/(2 sqrt(dim)), shrunk by a quarter-side margin,
    positioned by a random offset that keeps every support point clear of
    every grid hyperplane.

    With finite support the construction leaks no mass at all: every support
    point lands strictly inside a kept cell.
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    if m.space.kind != "euclidean":
        raise DomainError("grid partitions require a euclidean occupation measure")
    dim = m.space.dim
    points = sorted(m.entries.keys())
    if not points:
        raise DomainError("occupation measure has empty support")
    h = eps / (2.0 * math.sqrt(dim))
    rng = np.random.default_rng(seed)
    # The margin starts at a quarter side and halves when the support is too
    # crowded for any offset to clear it; every partition bullet only needs
    # the margin to stay positive.
    delta = h / 4.0
    offset = None
    attempts = 0
    while offset is None and attempts < 64:
        for _ in range(16):
            attempts += 1
            cand = [float(c) for c in rng.uniform(0.0, h, dim)]
            ok = True
            for pt in points:
                for a in range(dim):
                    frac = (pt[a] - cand[a]) % h
                    if not (delta < frac < h - delta):
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                offset = cand
                break
            if attempts >= 64:
                break
        if offset is None:
            delta /= 2.0
    if offset is None:
        raise ConstructionError(
            "no grid offset cleared the support after 64 attempts"
        )
    groups: dict[tuple[int, ...], list] = {}
    for pt in points:
        gi = tuple(int(math.floor((pt[a] - offset[a]) / h)) for a in range(dim))
        groups.setdefault(gi, []).append(pt)
    cells, reps, labels = [], [], []
    for rank, gi in enumerate(sorted(groups)):
        lo = tuple(offset[a] + gi[a] * h + delta for a in range(dim))
        hi = tuple(offset[a] + (gi[a] + 1) * h - delta for a in range(dim))
        cells.append(Box(lo, hi))
        members = groups[gi]
        rep = max(members, key=lambda p: (m.entries[p], tuple(-c for c in p)))
        reps.append(rep)
        labels.append(f"c{rank:03d}")
    induced = _induced_space(m.space, labels, reps)
    part = Partition(
        space=m.space,
        cells=tuple(cells),
        representatives=tuple(reps),
        labels=tuple(labels),
        epsilon=eps,
        margin=delta,
        induced_space=induced,
    )
    _partition_postconditions(part, m)
    return part


def finite_partition(space: StateSpace, keep=None) -> Partition:
    """Each kept label is its own cell with itself as representative."""
    if space.kind != "finite":
        raise DomainError("finite_partition needs a finite space")
    kept = tuple(space.labels if keep is None else [s for s in space.labels if s in set(keep)])
    if not kept:
        raise DomainError("no labels kept")
    return Partition(
        space=space,
        cells=kept,
        representatives=kept,
        labels=kept,
        epsilon=math.inf,
        margin=0.0,
        induced_space=space,
    )


def _induced_space(space, labels, reps) -> StateSpace:
    dist = tuple(
        tuple(space.distance(a, b) for b in reps) for a in reps
    )
    if len(labels) == 1:
        return StateSpace.finite(labels)
    return StateSpace.finite(labels, dist)


@dataclass(frozen=True)
class TimeChange:
    """The inside-the-union clock A and its right-continuous inverse sigma.

    ``runs`` lists the maximal inside intervals as (u_start, u_end, s_start)
    in loop time u and trace time s; A has slope 1 on them and 0 elsewhere.
    """

    duration: float
    t_eps: float
    runs: tuple[tuple[float, float, float], ...]

    def A_at(self, u: float) -> float:
        k = math.floor(u / self.duration) if self.duration > 0 else 0
        base = u - k * self.duration
        if base < 0:
            base += self.duration
            k -= 1
        acc = k * self.t_eps
        for u0, u1, s0 in self.runs:
            if base >= u1:
                acc_piece = u1 - u0
            elif base > u0:
                acc_piece = base - u0
            else:
                acc_piece = 0.0
            acc += acc_piece
        return acc

    def sigma_at(self, s: float) -> float:
        if self.t_eps <= 0:
            raise DomainError("empty trace has no inverse clock")
        k = math.floor(s / self.t_eps)
        base = s - k * self.t_eps
        if base < 0:
            base += self.t_eps
            k -= 1
        for u0, u1, s0 in self.runs:
            if s0 <= base < s0 + (u1 - u0):
                return u0 + (base - s0) + k * self.duration
        return self.duration + k * self.duration

    def A_points(self) -> list[tuple[float, float]]:
        pts = [(0.0, 0.0)]
        for u0, u1, s0 in self.runs:
            if not pts or pts[-1][0] < u0:
                pts.append((u0, s0))
            pts.append((u1, s0 + (u1 - u0)))
        if pts[-1][0] < self.duration:
            pts.append((self.duration, self.t_eps))
        return pts


def _walk_inside(l: BasedLoop, part: Partition):
    """Based-time intervals spent inside the cell union, with cell indices."""
    out = []
    u = 0.0
    for state, hold in based_segments(l):
        if part.touches_boundary(state):
            raise DomainError(f"state {state!r} touches a cell boundary")
        idx = part.locate(state)
        if idx is not None:
            out.append((u, u + hold, idx))
        u += hold
    return out


def trace_time_change(l: BasedLoop, part: Partition) -> TimeChange:
    """Clock that accumulates at unit rate while the loop sits inside a cell."""
    inside = _walk_inside(l, part)
    runs = []
    s = 0.0
    for u0, u1, _ in inside:
        if runs and runs[-1][1] == u0:
            prev = runs[-1]
            runs[-1] = (prev[0], u1, prev[2])
        else:
            runs.append((u0, u1, s))
        s += u1 - u0
    t_eps = math.fsum(u1 - u0 for u0, u1, _ in inside)
    return TimeChange(duration=l.duration, t_eps=t_eps, runs=tuple(runs))


def induced_discrete_loop(l: BasedLoop, part: Partition) -> Loop:
    loop, _ = _induced_with_anchor(l, part)
    return loop


def _induced_with_anchor(l: BasedLoop, part: Partition) -> tuple[Loop, float]:
    """Induced loop plus the trace time its word origin corresponds to.

    The word is read from the basepoint's image on the trace clock; when the
    first and last runs share a cell they merge circularly, which moves the
    word origin back to that run's start.
    """
    inside = _walk_inside(l, part)
    if not inside:
        raise DomainError("loop never enters the cell union; empty trace")
    runs: list[tuple[str, float]] = []
    for u0, u1, idx in inside:
        label = part.labels[idx]
        if runs and runs[-1][0] == label:
            runs[-1] = (label, runs[-1][1] + (u1 - u0))
        else:
            runs.append((label, u1 - u0))
    anchor = 0.0
    if len(runs) > 1 and runs[0][0] == runs[-1][0]:
        tail_label, tail_len = runs.pop()
        runs[0] = (runs[0][0], runs[0][1] + tail_len)
        anchor = tail_len
    word = tuple(Segment(label, hold) for label, hold in runs)
    loop = Loop(part.induced_space, word)
    t_eps = loop.duration
    anchor = (t_eps - anchor) % t_eps if anchor > 0 else 0.0
    return loop, anchor


def verify_trace_identity(
    l: BasedLoop,
    part: Partition,
    max_n: int,
    cap: int = 500,
    rel_tol: float = 1e-9,
) -> bool:
    """Occupation values of cell tuples agree between the induced loop and
    the original, for every tuple up to length max_n (capped enumeration)."""
    induced = induced_discrete_loop(l, part)
    ncells = len(part.cells)
    count = 0
    scale = max(l.duration, 1.0)
    for n in range(1, max_n + 1):
        for combo in _tuples(ncells, n):
            if count >= cap:
                return True
            count += 1
            lhs = multi_occupation(
                induced, Pattern(tuple(part.labels[i] for i in combo))
            )
            rhs = multi_occupation(
                l.loop, Pattern(tuple(part.cells[i] for i in combo))
            )
            if abs(lhs - rhs) > rel_tol * max(abs(lhs), abs(rhs), 1e-12 * scale**n):
                return False
    return True


def _tuples(ncells: int, n: int):
    idx = [0] * n
    while True:
        yield tuple(idx)
        for pos in range(n - 1, -1, -1):
            idx[pos] += 1
            if idx[pos] < ncells:
                break
            idx[pos] = 0
        else:
            return


@dataclass(frozen=True)
class ConvergenceRow:
    epsilon: float
    equal: bool
    offset: float | None
    sup_distance: float | None


@dataclass(frozen=True)
class ConvergenceReport:
    """Ladder of induced-loop comparisons over decreasing epsilon.

    ``limiting_offset`` is the final row's pulled-back offset T, satisfying
    l2(s + T) = l1(s) when the ladder succeeds; ``final_sup_distance`` is
    sup_s d_S(l1(s), l2(s + T)).
    """

    rows: tuple[ConvergenceRow, ...]
    limiting_offset: float | None
    final_sup_distance: float | None


def circular_sup_distance(l1: BasedLoop, l2: BasedLoop, shift: float) -> float:
    """Sup of d_S(l1(s), l2(s + shift)) for piecewise-constant loops.

    Evaluated at midpoints of the pieces cut by both jump sets; pieces of
    relative width below 1e-9 are roundoff slivers of the shift arithmetic,
    not genuine segments, and are skipped.
    """
    t1 = l1.duration
    t2 = l2.duration
    pts = {0.0}
    for x in l1.loop.boundaries():
        pts.add((x - l1.phase) % t1)
    for x in l2.loop.boundaries():
        pts.add((x - l2.phase - shift) % t2)
    brk = sorted(p for p in pts if 0.0 <= p < t1)
    brk.append(t1)
    worst = 0.0
    space = l1.space
    sliver = 1e-9 * t1
    for s0, s1 in zip(brk, brk[1:]):
        if s1 - s0 <= sliver:
            continue
        s = 0.5 * (s0 + s1)
        d = space.distance(evaluate(l1, s), evaluate(l2, (s + shift) % t2))
        if d > worst:
            worst = d
    return worst


def convergence_experiment(
    l1: BasedLoop, l2: BasedLoop, eps_sequence, seed: int = 0
) -> ConvergenceReport:
    """Build the ladder: per epsilon, induce both discrete loops over a shared
    partition of the pooled occupation measure, compare up to rotation, and
    pull the matching offset back to the original clock."""
    if l1.space != l2.space:
        raise DomainError("loops live on different state spaces")
    if l1.space.kind != "euclidean":
        raise DomainError("the grid pipeline runs on euclidean loops")
    eps_list = list(eps_sequence)
    if not eps_list or any(e <= 0 for e in eps_list):
        raise DomainError("eps_sequence must be positive")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise DomainError("eps_sequence must strictly decrease")
    pooled = _pooled_measure(l1.loop, l2.loop)
    rows = []
    limiting = None
    for k, eps in enumerate(eps_list):
        part = build_partition(pooled, eps, seed + k)
        d1, a1 = _induced_with_anchor(l1, part)
        d2, a2 = _induced_with_anchor(l2, part)
        rep = equals_up_to_rotation(d2, d1)
        if not rep.equal:
            rows.append(ConvergenceRow(eps, False, None, None))
            continue
        t_eps = d2.duration
        t2_trace = (rep.offset + a2 - a1) % t_eps
        tc2 = trace_time_change(l2, part)
        t2 = tc2.sigma_at(t2_trace) % l2.duration
        sup = circular_sup_distance(l1, l2, t2)
        rows.append(ConvergenceRow(eps, True, t2, sup))
        limiting = t2
    final_sup = None
    if limiting is not None:
        final_sup = circular_sup_distance(l1, l2, limiting)
    return ConvergenceReport(tuple(rows), limiting, final_sup)


def _pooled_measure(a: Loop, b: Loop) -> OccupationMeasure:
    acc: dict = {}
    for loop in (a, b):
        for seg in loop.word:
            acc[seg.state] = acc.get(seg.state, 0.0) + seg.hold
    return OccupationMeasure(a.space, acc, math.fsum(acc.values()))
