"""Skorokhod-type metrics for piecewise-constant loops.

``skorokhod_d`` computes the time-warp metric on normalized based loops:
the infimum over increasing bijections lambda of [0,1] of

    max |log slope of lambda|  +  sup_u d_S(a(lambda(u)), b(u)).

For piecewise-constant paths the state term only depends on which cells of
the product grid (a-segments x b-segments) the graph of lambda visits, so
the solver sweeps the finite set of candidate state costs beta (the grid's
distance values) and, for each, finds the least slope budget alpha by
binary search on a reachability propagation: intervals of attainable
heights are pushed column by column under the constraint that local slopes
stay inside [exp(-alpha), exp(alpha)] and the path stays inside admissible
cell runs.  The reported value is the objective evaluated exactly at a
reconstructed witness bijection, so every result is a certified upper
bound that reproduces under re-evaluation.

``based_distance`` adds the duration gap; ``loop_distance`` minimizes the
based metric over basepoint candidates of the second loop (all segment
midpoints plus every jump-to-jump alignment) followed by golden-section
refinement, returning an upper bound with witnesses.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .loops import BasedLoop, Loop, based_segments, canonical_based, normalize, rotate

_ALPHA_CAP = 48.0
_BISECT_TOL = 1e-7
_PAD = 1e-12


@dataclass(frozen=True)
class PLBijection:
    """Increasing piecewise-linear bijection of [0,1], stored as breakpoints."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = self.points
        if len(pts) < 2:
            raise DomainError("a bijection needs at least two breakpoints")
        if pts[0] != (0.0, 0.0) or pts[-1] != (1.0, 1.0):
            raise DomainError("breakpoints must start at (0,0) and end at (1,1)")
        for (u0, v0), (u1, v1) in zip(pts, pts[1:]):
            if not (u1 > u0 and v1 > v0):
                raise DomainError(
                    f"breakpoints must strictly increase in both coordinates "
                    f"({u0},{v0}) -> ({u1},{v1})"
                )

    @classmethod
    def identity(cls) -> "PLBijection":
        return cls(((0.0, 0.0), (1.0, 1.0)))

    @classmethod
    def from_arrays(cls, us, vs) -> "PLBijection":
        return cls(tuple((float(u), float(v)) for u, v in zip(us, vs)))

    def __call__(self, u: float) -> float:
        pts = self.points
        if u <= 0.0:
            return 0.0
        if u >= 1.0:
            return 1.0
        us = [p[0] for p in pts]
        i = bisect_right(us, u) - 1
        u0, v0 = pts[i]
        u1, v1 = pts[i + 1]
        return v0 + (u - u0) * (v1 - v0) / (u1 - u0)

    def inverse_at(self, v: float) -> float:
        pts = self.points
        if v <= 0.0:
            return 0.0
        if v >= 1.0:
            return 1.0
        vs = [p[1] for p in pts]
        i = bisect_right(vs, v) - 1
        u0, v0 = pts[i]
        u1, v1 = pts[i + 1]
        return u0 + (v - v0) * (u1 - u0) / (v1 - v0)

    def inverse(self) -> "PLBijection":
        return PLBijection(tuple((v, u) for u, v in self.points))


def slope_distortion(lam: PLBijection) -> float:
    """Max |log slope| over the linear pieces.

    Equals the sup over all chords: a chord's log slope is sandwiched
    between the extreme piece log slopes it spans.
    """
    worst = 0.0
    for (u0, v0), (u1, v1) in zip(lam.points, lam.points[1:]):
        s = abs(math.log((v1 - v0) / (u1 - u0)))
        if s > worst:
            worst = s
    return worst


def regather(lam: PLBijection, t: float) -> PLBijection:
    """Cut the graph at u = t and swap the two parts into a new bijection.

    The output is assembled from per-piece increments, so every surviving
    piece keeps its slope bit-for-bit and the cut piece's two halves carry
    one rounding each; the slope distortion is preserved to roundoff.
    """
    if not (0.0 <= t < 1.0):
        raise DomainError(f"cut point {t} outside [0, 1)")
    if t == 0.0:
        return lam
    pts = lam.points
    us = [p[0] for p in pts]
    i = bisect_right(us, t) - 1
    u0, v0 = pts[i]
    u1, v1 = pts[i + 1]
    slope = (v1 - v0) / (u1 - u0)
    deltas = [
        (b[0] - a[0], b[1] - a[1]) for a, b in zip(pts, pts[1:])
    ]
    head = (t - u0, slope * (t - u0))
    tail = (u1 - t, slope * (u1 - t))
    pieces = [tail] + deltas[i + 1 :] + deltas[:i] + [head]
    out = [(0.0, 0.0)]
    for du, dv in pieces:
        if du <= 0.0:
            continue
        out.append((out[-1][0] + du, out[-1][1] + dv))
    out[-1] = (1.0, 1.0)
    return PLBijection(tuple(out))


def random_pl_bijection(rng, interior: int | None = None) -> PLBijection:
    """Random bijection with bounded slope distortion (gap ratios <= 20)."""
    k = int(rng.integers(0, 7)) if interior is None else int(interior)
    us = _random_grid(rng, k)
    vs = _random_grid(rng, k)
    return PLBijection.from_arrays(us, vs)


def _random_grid(rng, k: int):
    gaps = rng.uniform(0.05, 1.0, k + 1)
    out = np.concatenate([[0.0], np.cumsum(gaps)])
    out /= out[-1]
    out[-1] = 1.0
    return out


def random_lambda_batch(rng, count: int, interior: int):
    """(U, V) arrays of shape (count, interior + 2) describing random bijections."""
    gaps_u = rng.uniform(0.05, 1.0, (count, interior + 1))
    gaps_v = rng.uniform(0.05, 1.0, (count, interior + 1))
    U = np.concatenate([np.zeros((count, 1)), np.cumsum(gaps_u, axis=1)], axis=1)
    V = np.concatenate([np.zeros((count, 1)), np.cumsum(gaps_v, axis=1)], axis=1)
    U /= U[:, -1:]
    V /= V[:, -1:]
    U[:, -1] = 1.0
    V[:, -1] = 1.0
    return U, V


@dataclass(frozen=True)
class DistanceResult:
    """A solver output: a certified upper bound with optional witnesses."""

    value: float
    witness_lambda: PLBijection | None = None
    witness_offset: float | None = None
    certified_upper_bound: bool = True


def _profile(bl: BasedLoop):
    """Normalized based subdivision: boundary list ending exactly at 1.0 and states."""
    if abs(bl.duration - 1.0) > 1e-9:
        raise DomainError("based loop must be normalized to duration 1")
    segs = based_segments(bl)
    bounds = [0.0]
    for _, ln in segs:
        bounds.append(bounds[-1] + ln)
    bounds[-1] = 1.0
    states = [s for s, _ in segs]
    return bounds, states


def _distance_matrix(space, sa, sb):
    return [[space.distance(x, y) for y in sb] for x in sa]


def alignment_objective(a: BasedLoop, b: BasedLoop, lam: PLBijection) -> float:
    """Exact objective of one bijection: slope distortion plus the sup of
    d_S(a(lambda(u)), b(u)) over the finitely many constant pieces."""
    Va, sa = _profile(a)
    Vb, sb = _profile(b)
    if a.space != b.space:
        raise DomainError("loops live on different state spaces")
    brk = sorted(set([0.0, 1.0] + Vb[1:-1] + [lam.inverse_at(v) for v in Va[1:-1]]))
    space = a.space
    worst = 0.0
    for u0, u1 in zip(brk, brk[1:]):
        mid = 0.5 * (u0 + u1)
        j = min(bisect_right(Vb, mid) - 1, len(sb) - 1)
        i = min(bisect_right(Va, lam(mid)) - 1, len(sa) - 1)
        d = space.distance(sa[i], sb[j])
        if d > worst:
            worst = d
    return slope_distortion(lam) + worst


def batch_alignment_objective(a: BasedLoop, b: BasedLoop, U, V):
    """Objectives of many bijections at once; rows of U, V are breakpoints."""
    Va, sa = _profile(a)
    Vb, sb = _profile(b)
    D = np.asarray(_distance_matrix(a.space, sa, sb))
    Va = np.asarray(Va)
    Vb = np.asarray(Vb)
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    n, pts = U.shape
    dU = np.diff(U, axis=1)
    dV = np.diff(V, axis=1)
    phi = np.abs(np.log(dV / dU)).max(axis=1)
    slopes = dV / dU
    cols = [np.tile(Vb[1:-1], (n, 1))] if len(Vb) > 2 else []
    pulled = []
    for v in Va[1:-1]:
        idx = np.clip((V <= v).sum(axis=1) - 1, 0, pts - 2)
        u0 = np.take_along_axis(U, idx[:, None], axis=1)[:, 0]
        v0 = np.take_along_axis(V, idx[:, None], axis=1)[:, 0]
        s = np.take_along_axis(slopes, idx[:, None], axis=1)[:, 0]
        pulled.append(u0 + (v - v0) / s)
    if pulled:
        cols.append(np.stack(pulled, axis=1))
    if cols:
        brk = np.concatenate(cols, axis=1)
        brk.sort(axis=1)
        brk = np.concatenate([np.zeros((n, 1)), brk, np.ones((n, 1))], axis=1)
    else:
        brk = np.concatenate([np.zeros((n, 1)), np.ones((n, 1))], axis=1)
    mids = 0.5 * (brk[:, :-1] + brk[:, 1:])
    t = mids.shape[1]
    b_idx = np.clip(np.searchsorted(Vb, mids.ravel(), side="right") - 1, 0, len(sb) - 1)
    ii = np.clip(
        (U[:, None, :] <= mids[:, :, None]).sum(axis=2) - 1, 0, pts - 2
    )
    u0 = np.take_along_axis(U, ii.reshape(n, t), axis=1)
    v0 = np.take_along_axis(V, ii.reshape(n, t), axis=1)
    sl = np.take_along_axis(slopes, ii.reshape(n, t), axis=1)
    lam_mid = v0 + (mids - u0) * sl
    a_idx = np.clip(
        np.searchsorted(Va, lam_mid.ravel(), side="right") - 1, 0, len(sa) - 1
    )
    dvals = D[a_idx, b_idx.ravel()].reshape(n, t).max(axis=1)
    return phi + dvals


def _runs_for_columns(D, beta, Va):
    """Per b-segment column, maximal admissible intervals of the a-axis."""
    p = len(D)
    q = len(D[0])
    cols = []
    for j in range(q):
        runs = []
        i = 0
        while i < p:
            if D[i][j] <= beta + _PAD:
                s = i
                while i < p and D[i][j] <= beta + _PAD:
                    i += 1
                runs.append((Va[s], Va[i]))
            else:
                i += 1
        cols.append(runs)
    return cols


def _run_top(runs, v):
    for lo, hi in runs:
        if lo - 1e-9 <= v <= hi + 1e-9:
            return hi
    return None


def _propagate(alpha, Vb, runs_cols, record=None):
    """Reachability of (1,1) under the slope cone and the admissible runs."""
    elo = math.exp(-alpha)
    ehi = math.exp(alpha)
    if _run_top(runs_cols[0], 0.0) is None:
        return False
    reach = [(0.0, 0.0)]
    if record is not None:
        record.append(reach)
    q = len(runs_cols)
    for j in range(q):
        w = Vb[j + 1] - Vb[j]
        cand = []
        for lo, hi in reach:
            top = _run_top(runs_cols[j], lo)
            if top is None:
                continue
            nlo = max(lo + elo * w - _PAD, lo)
            nhi = min(hi + ehi * w + _PAD, top)
            if nlo <= nhi:
                cand.append((nlo, nhi))
        cand.sort()
        merged = []
        for lo, hi in cand:
            if merged and lo <= merged[-1][1] + _PAD:
                last = merged[-1]
                merged[-1] = (last[0], max(last[1], hi))
            else:
                merged.append((lo, hi))
        if j + 1 < q:
            nxt = []
            for lo, hi in merged:
                for rs, re in runs_cols[j + 1]:
                    s, e = max(lo, rs), min(hi, re)
                    if s <= e:
                        nxt.append((s, e))
            reach = nxt
        else:
            reach = merged
        if not reach:
            return False
        if record is not None:
            record.append(reach)
    return any(lo - 1e-9 <= 1.0 <= hi + 1e-9 for lo, hi in reach)


def _min_slope_budget(Vb, runs_cols):
    """Least alpha making the admissible region traversable, or None."""
    if not _propagate(_ALPHA_CAP, Vb, runs_cols):
        return None
    if _propagate(0.0, Vb, runs_cols):
        return 0.0
    lo, hi = 0.0, 1.0
    while hi < _ALPHA_CAP and not _propagate(hi, Vb, runs_cols):
        lo = hi
        hi *= 2.0
    hi = min(hi, _ALPHA_CAP)
    while hi - lo > _BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if _propagate(mid, Vb, runs_cols):
            hi = mid
        else:
            lo = mid
    return hi


def _snap(c, grid, lo, hi):
    best = c
    for g in grid:
        if abs(g - c) <= 1e-9 and lo <= g <= hi:
            best = g
            break
    return best


def _backtrack(alpha, Va, Vb, record):
    """Extract breakpoints of a feasible bijection from the recorded reach sets."""
    elo = math.exp(-alpha)
    ehi = math.exp(alpha)
    # matches the forward pass: endpoint slack 1e-9 plus interval padding
    pad = 2e-9
    q = len(Vb) - 1
    v = 1.0
    points = [(1.0, 1.0)]
    for j in range(q - 1, 0, -1):
        w = Vb[j + 1] - Vb[j]
        lo_a = v - ehi * w - pad
        hi_a = v - elo * w + pad
        target = v - w
        best_c = None
        for lo, hi in record[j]:
            L, H = max(lo, lo_a), min(hi, hi_a)
            if L > H:
                continue
            c = min(max(target, L), H)
            c = _snap(c, Va, L, H)
            if best_c is None or abs(c - target) < abs(best_c - target):
                best_c = c
        if best_c is None:
            return None
        if best_c >= v:
            best_c = v - max(elo * w * 0.5, 1e-13)
        points.append((Vb[j], best_c))
        v = best_c
    if v <= 0.0:
        return None
    points.append((0.0, 0.0))
    points.reverse()
    for (u0, v0), (u1, v1) in zip(points, points[1:]):
        if not (u1 > u0 and v1 > v0):
            return None
    return PLBijection(tuple(points))


def skorokhod_d(a: BasedLoop, b: BasedLoop) -> DistanceResult:
    """Time-warp metric of two normalized based loops.

    Sweeps candidate state costs in increasing order (pruned once the
    running best is beaten by beta alone), binary-searches the slope budget
    per candidate, and reports the objective of the reconstructed witness.
    """
    if a.space != b.space:
        raise DomainError("loops live on different state spaces")
    Va, sa = _profile(a)
    Vb, sb = _profile(b)
    D = _distance_matrix(a.space, sa, sb)
    betas = sorted({d for row in D for d in row})
    best_bound = math.inf
    best = None
    for beta in betas:
        if beta >= best_bound:
            break
        runs_cols = _runs_for_columns(D, beta, Va)
        alpha = _min_slope_budget(Vb, runs_cols)
        if alpha is None:
            continue
        if alpha + beta < best_bound:
            best_bound = alpha + beta
            best = (alpha, beta, runs_cols)
    alpha, beta, runs_cols = best
    record = []
    _propagate(alpha, Vb, runs_cols, record=record)
    witness = _backtrack(alpha, Va, Vb, record)
    identity = PLBijection.identity()
    cands = [identity] if witness is None else [witness, identity]
    value, lam = None, None
    for c in cands:
        obj = alignment_objective(a, b, c)
        if value is None or obj < value:
            value, lam = obj, c
    return DistanceResult(value, lam, None, True)


def based_distance(a: BasedLoop, b: BasedLoop) -> DistanceResult:
    """Duration gap plus the time-warp metric of the normalizations.

    The witness bijection certifies the normalized comparison; the reported
    value adds the duration gap on top of its objective.
    """
    if a.space != b.space:
        raise DomainError("loops live on different state spaces")
    gap = abs(a.duration - b.duration)
    inner = skorokhod_d(normalize(a), normalize(b))
    return DistanceResult(gap + inner.value, inner.witness_lambda, None, True)


def _candidate_phases(a_rep: BasedLoop, b: Loop):
    """Segment midpoints of b plus every b-jump / a-jump alignment."""
    tb = b.duration
    bounds = b.boundaries()
    phases = []
    for i, seg in enumerate(b.word):
        phases.append(bounds[i] + 0.5 * seg.hold)
    if len(b.word) > 1:
        Va, _ = _profile(normalize(a_rep))
        jumps_b = bounds[:-1]
        for f in Va[1:-1]:
            for u in jumps_b:
                phase = (u - f * tb) % tb
                if phase >= tb:
                    phase = 0.0
                near = min(abs(phase - x) for x in bounds)
                near = min(near, tb - phase)
                if near <= 1e-12 * tb:
                    continue
                phases.append(phase)
    return phases


def _golden_refine(fn, lo, hi, best_x, best_val, steps):
    """Golden-section descent on [lo, hi], seeded with an evaluated point."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = fn(x1), fn(x2)
    if f1 < best_val:
        best_x, best_val = x1, f1
    if f2 < best_val:
        best_x, best_val = x2, f2
    for _ in range(steps):
        if b - a < 1e-12:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = fn(x1)
            if f1 < best_val:
                best_x, best_val = x1, f1
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = fn(x2)
            if f2 < best_val:
                best_x, best_val = x2, f2
    return best_x, best_val


def loop_distance(
    a: Loop, b: Loop, refine_steps: int = 40, *, a_rep: BasedLoop | None = None
) -> DistanceResult:
    """Quotient metric upper bound: minimize the based metric over basepoint
    candidates of b, holding one representative of a fixed.

    Fixing a single a-representative is enough because the infimum over the
    second argument's class does not change when the first is circularly
    translated through a continuity point.
    """
    if a.space != b.space:
        raise DomainError("loops live on different state spaces")
    if a_rep is None:
        a_rep = canonical_based(a)
    tb = b.duration
    bounds = b.boundaries()

    def eval_phase(phase):
        if len(b.word) > 1 and any(phase == x for x in bounds):
            return math.inf, None
        res = based_distance(a_rep, BasedLoop(b, phase))
        return res.value, res

    best_phase, best_val, best_res = None, math.inf, None
    for phase in _candidate_phases(a_rep, b):
        val, res = eval_phase(phase)
        if val < best_val:
            best_phase, best_val, best_res = phase, val, res
    if refine_steps > 0 and len(b.word) > 1:
        k = bisect_right(bounds, best_phase) - 1
        seg_lo, seg_hi = bounds[k], bounds[k + 1]
        margin = 1e-9 * tb
        lo = max(seg_lo + margin, best_phase - 0.5 * (seg_hi - seg_lo))
        hi = min(seg_hi - margin, best_phase + 0.5 * (seg_hi - seg_lo))
        if lo < hi:
            ref_x, ref_val = _golden_refine(
                lambda x: eval_phase(x)[0], lo, hi, best_phase, best_val, refine_steps
            )
            if ref_val < best_val:
                best_phase, best_val = ref_x, ref_val
                best_res = eval_phase(ref_x)[1]
    return DistanceResult(
        best_val, best_res.witness_lambda, best_phase, True
    )


def translation_continuity_probe(l: BasedLoop, h_sequence) -> list[float]:
    """Based distances D(translate(l, h), l) along a ladder of shifts h.

    Every h must keep the shifted basepoint inside its original segment.
    """
    bounds = l.loop.boundaries()
    k = bisect_right(bounds, l.phase) - 1
    headroom = bounds[k + 1] - l.phase if len(l.loop.word) > 1 else math.inf
    out = []
    for h in h_sequence:
        if not (0 < h):
            raise DomainError("shifts must be positive")
        if h >= headroom:
            raise DomainError(
                f"shift {h} leaves the basepoint's segment (headroom {headroom})"
            )
        shifted = rotate(l, h)
        if shifted is None:
            raise DomainError(f"shift {h} lands on a jump time")
        out.append(based_distance(shifted, l).value)
    return out
