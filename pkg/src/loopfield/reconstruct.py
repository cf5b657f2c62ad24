"""Recovering a finite-alphabet loop from its occupation values.

The search enumerates canonical adjacent-distinct circular words over the
visited alphabet, cheapest lengths first, prunes words whose combinatorial
support (which short patterns can be positive at all) disagrees with the
oracle, and fits holding times by bounded nonlinear least squares against
the oracle's values.  The first word fitting every equation within
tolerance is the answer: loops with equal occupation values coincide up to
rotation, so no later candidate can also fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.optimize import least_squares

from .errors import DomainError, ReconstructionError, ValidationError
from .loops import Loop, equals_up_to_rotation, generate_random_loop
from .occupation import Pattern, _simplex_integral, multi_occupation
from .spaces import StateSpace


class LoopOracle:
    """Occupation-value oracle backed by a hidden loop."""

    def __init__(self, loop: Loop):
        self._loop = loop
        self.calls = 0

    def value(self, pattern: Pattern) -> float:
        self.calls += 1
        return multi_occupation(self._loop, pattern)


def _canonical_pattern_key(labels: tuple) -> tuple:
    n = len(labels)
    return min(tuple(labels[(k + j) % n] for k in range(n)) for j in range(n))


class TableOracle:
    """Oracle over a recorded (pattern, value) table.

    Entries are keyed by the least rotation of the pattern; the table must
    be rotation-invariant within 1e-9 relative or loading fails.
    """

    def __init__(self, entries):
        self.calls = 0
        self._table: dict[tuple, float] = {}
        for i, (labels, value) in enumerate(entries):
            labels = tuple(labels)
            if not labels:
                raise ValidationError(f"entry {i}: empty pattern")
            if value < 0:
                raise ValidationError(f"entry {i}: negative value {value}")
            key = _canonical_pattern_key(labels)
            if key in self._table:
                prev = self._table[key]
                if abs(prev - value) > 1e-9 * max(abs(prev), abs(value), 1e-12):
                    raise ValidationError(
                        f"entry {i}: pattern {list(labels)} breaks rotation "
                        f"invariance ({value} vs {prev})"
                    )
            else:
                self._table[key] = float(value)

    def value(self, pattern: Pattern) -> float:
        self.calls += 1
        key = _canonical_pattern_key(pattern.cells)
        if key not in self._table:
            raise ValidationError(
                f"oracle table has no value for pattern {list(pattern.cells)}"
            )
        return self._table[key]


@dataclass(frozen=True)
class ReconstructionResult:
    loop: Loop
    residual: float
    candidates_tried: int


def _candidate_words(labels: tuple[str, ...], q: int) -> list[tuple[str, ...]]:
    """Canonical circular adjacent-distinct words of length q covering labels."""
    need = set(labels)
    out = []
    for word in product(labels, repeat=q):
        if any(word[i] == word[(i + 1) % q] for i in range(q)):
            continue
        if set(word) != need:
            continue
        if word != min(tuple(word[k:] + word[:k]) for k in range(q)):
            continue
        out.append(word)
    return out


def _embeds(word: tuple[str, ...], cells: tuple[str, ...]) -> bool:
    """Whether the pattern can pick up any mass on this word (unit holds)."""
    n = len(cells)
    rows = [[c == s for s in word] for c in cells]
    taus = [1.0] * len(word)
    total = 0.0
    for j in range(n):
        total += _simplex_integral(taus, [rows[(k + j) % n] for k in range(n)])
    return total > 0.0


def _pattern_pool(labels: tuple[str, ...], max_len: int):
    for n in range(1, max_len + 1):
        for cells in product(labels, repeat=n):
            yield cells


def _necklace_pool(labels: tuple[str, ...], max_len: int):
    """Patterns up to max_len with cyclic rotations deduplicated.

    Rotated patterns always produce the same occupation value, hence the
    same equation; only the least rotation of each class is kept.
    """
    for n in range(1, max_len + 1):
        for cells in product(labels, repeat=n):
            if cells == _canonical_pattern_key(cells):
                yield cells


def _pattern_monomials(word: tuple[str, ...], cells: tuple[str, ...]) -> dict:
    """Monomial expansion of one pattern's value on a word with symbolic holds.

    The value is a polynomial in the holds: each rotation contributes, per
    weakly increasing matched assignment of positions to segments, the
    product of hold^m / m! over the run lengths m.  Returns a dict mapping
    exponent tuples to summed coefficients.
    """
    q = len(word)
    n = len(cells)
    out: dict[tuple[int, ...], float] = {}
    match = [[cells[k] == word[i] for i in range(q)] for k in range(n)]
    expo = [0] * q

    def place(k: int, rot: int, imin: int, coef: float):
        if k == n:
            key = tuple(expo)
            out[key] = out.get(key, 0.0) + coef
            return
        krot = (k + rot) % n
        for i in range(imin, q):
            if match[krot][i]:
                expo[i] += 1
                place(k + 1, rot, i, coef / expo[i])
                expo[i] -= 1

    for rot in range(n):
        place(0, rot, 0, 1.0)
    return out


class _Equations:
    """Targets and an exact polynomial model for one candidate word.

    The per-pattern monomial expansion makes the model a single matrix
    product in log space and gives the Jacobian analytically.
    """

    def __init__(self, word, states_order, totals, pattern_targets):
        self.word = word
        q = len(word)
        self.states_order = states_order
        self.total_targets = np.array([totals[x] for x in states_order])
        self.occ = {
            x: np.array([i for i, s in enumerate(word) if s == x], dtype=int)
            for x in states_order
        }
        self.patterns = [cells for cells, _ in pattern_targets]
        self.pattern_targets = np.array([v for _, v in pattern_targets])
        rows, exps, coefs = [], [], []
        for idx, cells in enumerate(self.patterns):
            for e, c in _pattern_monomials(word, cells).items():
                rows.append(idx)
                exps.append(e)
                coefs.append(c)
        self._rows = np.asarray(rows, dtype=np.intp)
        self._E = np.asarray(exps, dtype=float)
        self._C = np.asarray(coefs)
        self._P = len(self.patterns)
        self.targets = np.concatenate([self.total_targets, self.pattern_targets])

    def _monomials(self, sigma: np.ndarray) -> np.ndarray:
        return self._C * np.exp(self._E @ np.log(sigma))

    def model(self, sigma: np.ndarray) -> np.ndarray:
        tot = np.array([sigma[self.occ[x]].sum() for x in self.states_order])
        pat = np.bincount(self._rows, weights=self._monomials(sigma), minlength=self._P)
        return np.concatenate([tot, pat])

    def jacobian(self, sigma: np.ndarray) -> np.ndarray:
        q = sigma.shape[0]
        ntot = len(self.states_order)
        J = np.zeros((ntot + self._P, q))
        for r, x in enumerate(self.states_order):
            J[r, self.occ[x]] = 1.0
        mono = self._monomials(sigma)
        for j in range(q):
            J[ntot:, j] = np.bincount(
                self._rows, weights=mono * self._E[:, j], minlength=self._P
            ) / sigma[j]
        return J

    def worst_relative(self, sigma: np.ndarray) -> float:
        m = self.model(sigma)
        return float(np.max(np.abs(m - self.targets) / self.targets))


def _fit_candidate(eqs: _Equations, t: float, tol: float, rng, restarts: int = 8):
    """Multi-restart bounded least squares on the holds; None if nothing fits."""
    q = len(eqs.word)
    hold_min = 1e-4 * t
    count = {x: len(eqs.occ[x]) for x in eqs.states_order}
    totals = dict(zip(eqs.states_order, eqs.total_targets))

    def residual(sigma):
        return (eqs.model(sigma) - eqs.targets) / eqs.targets

    def jac(sigma):
        return eqs.jacobian(sigma) / eqs.targets[:, None]

    best = None
    for attempt in range(restarts):
        x0 = np.empty(q)
        for x in eqs.states_order:
            idx = eqs.occ[x]
            if attempt == 0:
                split = np.full(len(idx), 1.0 / len(idx))
            else:
                w = rng.uniform(0.2, 1.0, len(idx))
                split = w / w.sum()
            x0[idx] = np.maximum(totals[x] * split, hold_min * 1.5)
        sol = least_squares(
            residual,
            x0,
            jac=jac,
            bounds=(hold_min, np.inf),
            method="trf",
            xtol=1e-14,
            ftol=1e-14,
            gtol=1e-14,
            max_nfev=200,
        )
        worst = eqs.worst_relative(sol.x)
        if best is None or worst < best[0]:
            best = (worst, sol.x)
        if worst < tol:
            break
    return best


def reconstruct_loop(
    oracle,
    space: StateSpace,
    q_max: int = 6,
    tol: float = 1e-6,
    seed: int = 0,
) -> ReconstructionResult:
    """Search for the loop behind an occupation oracle over a finite alphabet.

    Accepts the lexicographically first canonical word, at the smallest
    length, whose fitted holds reproduce every equation within relative
    tolerance.
    """
    if space.kind != "finite":
        raise DomainError("reconstruction runs over finite alphabets")
    if q_max < 1:
        raise DomainError("q_max must be >= 1")
    if tol <= 0:
        raise DomainError("tol must be positive")
    rng = np.random.default_rng(seed)
    cache: dict[tuple, float] = {}

    def ovalue(cells: tuple) -> float:
        key = _canonical_pattern_key(cells)
        if key not in cache:
            cache[key] = oracle.value(Pattern(cells))
        return cache[key]

    totals = {x: ovalue((x,)) for x in space.labels}
    t = math.fsum(totals.values())
    if t <= 0:
        raise ValidationError("oracle reports no occupation time at all")
    visited = tuple(x for x in space.labels if totals[x] > tol * t)
    if not visited:
        raise ValidationError("no state passes the visitation threshold")
    if len(visited) == 1:
        x = visited[0]
        loop = Loop.make(space, [(x, totals[x])])
        return ReconstructionResult(loop, 0.0, 1)

    support_thresh = lambda n: 1e-9 * max(t, 1.0) ** n
    support = {}
    for cells in _pattern_pool(visited, 3):
        support[cells] = ovalue(cells) > support_thresh(len(cells))

    tried = 0
    best_residual = math.inf
    for q in range(max(2, len(visited)), q_max + 1):
        for word in _candidate_words(visited, q):
            tried += 1
            ok = True
            for cells, positive in support.items():
                if len(cells) > min(q, 3):
                    continue
                if _embeds(word, cells) != positive:
                    ok = False
                    break
            if not ok:
                continue
            word_value = ovalue(word)
            if word_value <= support_thresh(q):
                # the loop's own word pattern always carries positive mass
                continue
            # Patterns below length 3 are blind to circular order (the
            # length-2 value is just a product of totals), so the pool digs
            # two levels past the word length, up to 6, where the hardest
            # two-label arrangements become separable.
            depth = min(q + 2, 6)
            pattern_targets = []
            word_key = _canonical_pattern_key(word)
            for cells in _necklace_pool(visited, depth):
                if len(pattern_targets) >= 200:
                    break
                v = ovalue(cells)
                if v > support_thresh(len(cells)):
                    pattern_targets.append((cells, v))
            if word_key not in [c for c, _ in pattern_targets]:
                pattern_targets.append((word_key, word_value))
            eqs = _Equations(word, visited, totals, pattern_targets)
            fit = _fit_candidate(eqs, t, tol, rng)
            if fit is None:
                continue
            worst, sigma = fit
            best_residual = min(best_residual, worst)
            if worst < tol:
                loop = Loop.make(space, zip(word, sigma)).canonical()
                return ReconstructionResult(loop, worst, tried)
    raise ReconstructionError(
        f"no word of length <= {q_max} fits the oracle within {tol}",
        best_residual=None if math.isinf(best_residual) else best_residual,
        candidates_tried=tried,
    )


@dataclass(frozen=True)
class InjectivityReport:
    """Outcome counts of a separation campaign over random loop pairs."""

    trials: int
    separated: int
    unseparated: int
    equivalent: int
    equivalent_mismatches: int
    shortest_separator_histogram: dict = field(default_factory=dict)
    unseparated_pairs: tuple = ()

    @property
    def findings(self) -> bool:
        return self.unseparated > 0 or self.equivalent_mismatches > 0


def _loop_dump(loop: Loop) -> list:
    return [[seg.state, seg.hold] for seg in loop.word]


def verify_injectivity(
    space: StateSpace,
    trials: int,
    max_segments: int = 6,
    n_max: int = 6,
    seed: int = 0,
    equivalent_share: float = 0.15,
    force_distinct: bool = False,
    pattern_cap: int = 25000,
    equivalent_cap: int = 500,
) -> InjectivityReport:
    """Hunt for loop pairs that no short pattern separates.

    Equivalent pairs (one a rotated rewrite of the other) double as a
    consistency check: all their tested values must agree.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    if space.kind != "finite":
        raise DomainError("the campaign runs over finite alphabets")
    ss = np.random.SeedSequence(seed)
    separated = 0
    unseparated = 0
    equivalent = 0
    mismatches = 0
    histogram: dict[int, int] = {}
    dumps = []
    labels = space.labels
    for child in ss.spawn(trials):
        rng = np.random.default_rng(child)
        a = _random_loop_for(space, max_segments, rng)
        if not force_distinct and rng.random() < equivalent_share:
            b = a.rotated_word(int(rng.integers(len(a.word))))
        else:
            b = _random_loop_for(space, max_segments, rng)
            if force_distinct:
                while equals_up_to_rotation(a, b).equal:
                    b = _random_loop_for(space, max_segments, rng)
        rep = equals_up_to_rotation(a, b)
        budget = pattern_cap
        if rep.equal:
            equivalent += 1
            budget = equivalent_cap
            for cells in _pattern_pool(labels, n_max):
                if budget <= 0:
                    break
                budget -= 1
                va = multi_occupation(a, Pattern(cells))
                vb = multi_occupation(b, Pattern(cells))
                if abs(va - vb) > 1e-9 * max(abs(va), abs(vb), 1e-12):
                    mismatches += 1
                    break
            continue
        sep_len = None
        for cells in _pattern_pool(labels, n_max):
            if budget <= 0:
                break
            budget -= 1
            va = multi_occupation(a, Pattern(cells))
            vb = multi_occupation(b, Pattern(cells))
            if abs(va - vb) > 1e-9 * max(abs(va), abs(vb), 1e-12):
                sep_len = len(cells)
                break
        if sep_len is None:
            unseparated += 1
            dumps.append((_loop_dump(a), _loop_dump(b)))
        else:
            separated += 1
            histogram[sep_len] = histogram.get(sep_len, 0) + 1
    return InjectivityReport(
        trials=trials,
        separated=separated,
        unseparated=unseparated,
        equivalent=equivalent,
        equivalent_mismatches=mismatches,
        shortest_separator_histogram=dict(sorted(histogram.items())),
        unseparated_pairs=tuple(dumps),
    )


def _random_loop_for(space: StateSpace, max_segments: int, rng) -> Loop:
    nlabels = len(space.labels)
    while True:
        segs = int(rng.integers(1, max_segments + 1))
        if nlabels == 1:
            segs = 1
        elif nlabels == 2 and segs > 1 and segs % 2 == 1:
            segs += 1 if segs < max_segments else -1
        if segs == 2 and nlabels < 2:
            continue
        return generate_random_loop(space, segs, int(rng.integers(2**63)))
