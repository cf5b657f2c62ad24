"""Circular words, based representatives, rotations, and rotation-equivalence.

A loop is a circular word of (state, holding time) segments with circularly
adjacent states distinct.  A based loop fixes a basepoint phase strictly
inside one segment, which makes evaluation right-continuous on [0, duration]
with the endpoint wrapping back to the basepoint value.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .spaces import State, StateSpace

_HOLD_SIG_DIGITS = 12


def _round_sig(x: float, digits: int = _HOLD_SIG_DIGITS) -> float:
    return float(f"{x:.{digits}g}")


@dataclass(frozen=True, slots=True)
class Segment:
    state: State
    hold: float


@dataclass(frozen=True)
class Loop:
    """A circular word of segments; the rotation-equivalence class carrier."""

    space: StateSpace
    word: tuple[Segment, ...]
    duration: float = None

    def __post_init__(self):
        if not self.word:
            raise DomainError("loop word must be nonempty")
        for i, seg in enumerate(self.word):
            self.space.validate_state(seg.state)
            if not (seg.hold > 0):
                raise DomainError(f"word[{i}].hold must be positive, got {seg.hold}")
        p = len(self.word)
        if p > 1:
            for i in range(p):
                if self.word[i].state == self.word[(i + 1) % p].state:
                    raise DomainError(
                        f"word[{i}] and word[{(i + 1) % p}] repeat state "
                        f"{self.word[i].state!r}; circular neighbours must differ"
                    )
        total = math.fsum(seg.hold for seg in self.word)
        if self.duration is None:
            object.__setattr__(self, "duration", total)
        elif abs(self.duration - total) > 8 * np.spacing(total):
            raise DomainError(
                f"duration {self.duration} does not match hold sum {total}"
            )

    @classmethod
    def make(cls, space: StateSpace, pairs) -> "Loop":
        return cls(space, tuple(Segment(s, float(h)) for s, h in pairs))

    def boundaries(self) -> list[float]:
        """Cumulative jump times of the word, starting at 0.0 and ending at duration."""
        out = [0.0]
        for seg in self.word:
            out.append(out[-1] + seg.hold)
        out[-1] = self.duration
        return out

    def states(self) -> list[State]:
        return [seg.state for seg in self.word]

    def holds(self) -> list[float]:
        return [seg.hold for seg in self.word]

    def rotated_word(self, k: int) -> "Loop":
        """The same loop, with the word cut moved forward by k segments."""
        p = len(self.word)
        k %= p
        return Loop(self.space, self.word[k:] + self.word[:k])

    def canonical(self) -> "Loop":
        return self.rotated_word(canonical_shift(self))

    def scaled(self, factor: float) -> "Loop":
        return Loop(
            self.space,
            tuple(Segment(seg.state, seg.hold * factor) for seg in self.word),
        )


def canonical_shift(loop: Loop) -> int:
    """Index of the least cyclic rotation of the segment sequence.

    Segments compare by (state key, hold rounded to 12 significant digits),
    so equal loops with float-noise holds canonicalize identically.
    """
    key = [
        (loop.space.state_key(seg.state), _round_sig(seg.hold)) for seg in loop.word
    ]
    p = len(key)
    best, best_k = None, 0
    for k in range(p):
        rot = tuple(key[(k + i) % p] for i in range(p))
        if best is None or rot < best:
            best, best_k = rot, k
    return best_k


@dataclass(frozen=True)
class BasedLoop:
    """A loop plus a basepoint phase at a continuity point of the circle."""

    loop: Loop
    phase: float

    def __post_init__(self):
        t = self.loop.duration
        if not (0 <= self.phase < t):
            raise DomainError(f"phase must lie in [0, {t}), got {self.phase}")
        if len(self.loop.word) > 1:
            for b in self.loop.boundaries():
                if self.phase == b:
                    raise DomainError(
                        f"phase {self.phase} sits on a jump time; basepoints must be "
                        "continuity points"
                    )

    @property
    def duration(self) -> float:
        return self.loop.duration

    @property
    def space(self) -> StateSpace:
        return self.loop.space


def evaluate(l: BasedLoop, u: float) -> State:
    """State of the based loop at time u, right-continuous, with l(duration) = l(0)."""
    t = l.duration
    if not (0 <= u <= t):
        raise DomainError(f"time {u} outside [0, {t}]")
    pos = l.phase + u
    if pos >= t:
        pos -= t
    bounds = l.loop.boundaries()
    idx = bisect_right(bounds, pos) - 1
    if idx >= len(l.loop.word):
        idx = len(l.loop.word) - 1
    return l.loop.word[idx].state


def rotate(l: BasedLoop, r: float) -> BasedLoop | None:
    """Shift the basepoint forward by r around the circle.

    Returns None (the invalid-basepoint flag) when the shifted phase lands
    exactly on a circular jump time.
    """
    t = l.duration
    phase = (l.phase + r) % t
    if phase >= t:  # float wrap of a value just below a multiple of t
        phase = 0.0
    if len(l.loop.word) > 1 and any(phase == b for b in l.loop.boundaries()):
        return None
    return BasedLoop(l.loop, phase)


def normalize(l: BasedLoop) -> BasedLoop:
    """Rescale time linearly so the duration becomes 1."""
    t = l.duration
    if t == 1.0:
        return l
    return BasedLoop(l.loop.scaled(1.0 / t), l.phase / t)


def based_segments(l: BasedLoop) -> list[tuple[State, float]]:
    """The segment subdivision of [0, duration] read from the basepoint.

    For multi-segment words the basepoint splits its segment, so the first
    and last pieces carry the same state.
    """
    word = l.loop.word
    if len(word) == 1:
        return [(word[0].state, l.duration)]
    bounds = l.loop.boundaries()
    k = bisect_right(bounds, l.phase) - 1
    out = [(word[k].state, bounds[k + 1] - l.phase)]
    p = len(word)
    for i in range(1, p):
        seg = word[(k + i) % p]
        out.append((seg.state, seg.hold))
    out.append((word[k].state, l.phase - bounds[k]))
    return out


@dataclass(frozen=True)
class EquivalenceReport:
    """Verdict of a rotation-equivalence test, with the witnessing time shift.

    When ``equal``, ``offset`` is the T in [0, duration) with
    a(s + T) = b(s) for all s on the circular clock.
    """

    equal: bool
    offset: float | None = None

    def __post_init__(self):
        if self.equal != (self.offset is not None):
            raise DomainError("offset must be present exactly when equal")


def equals_up_to_rotation(a: Loop, b: Loop, tol: float = 1e-9) -> EquivalenceReport:
    """Test whether two circular words coincide up to a cyclic shift.

    States must match exactly; holds match within relative tolerance ``tol``.
    The scan covers every shift, so the verdict does not depend on where
    either input word was cut.  Among matching shifts the smallest offset wins.
    """
    if a.space != b.space:
        raise DomainError("loops live on different state spaces")
    if tol <= 0:
        raise DomainError("tol must be positive")
    if len(a.word) != len(b.word):
        return EquivalenceReport(False)
    p = len(a.word)
    a_states, b_states = a.states(), b.states()
    a_holds, b_holds = a.holds(), b.holds()
    best = None
    for k in range(p):
        ok = True
        for i in range(p):
            j = (i + k) % p
            if b_states[i] != a_states[j]:
                ok = False
                break
            ha, hb = a_holds[j], b_holds[i]
            if abs(ha - hb) > tol * max(abs(ha), abs(hb)):
                ok = False
                break
        if ok:
            offset = math.fsum(a_holds[:k])
            if best is None or offset < best:
                best = offset
    if best is None:
        return EquivalenceReport(False)
    return EquivalenceReport(True, best)


def generate_random_loop(space: StateSpace, segments: int, seed: int) -> Loop:
    """Draw a random adjacent-distinct circular word, deterministically from seed.

    Holds are uniform on [0.2, 1.2).  Over a two-label alphabet circular
    words must alternate, which forces an even length.
    """
    if segments < 1:
        raise DomainError("segments must be >= 1")
    rng = np.random.default_rng(seed)
    holds = rng.uniform(0.2, 1.2, segments)
    if space.kind == "finite":
        labels = space.labels
        if len(labels) == 1:
            if segments != 1:
                raise DomainError(
                    "a one-label space only carries constant loops (segments=1)"
                )
            states = [labels[0]]
        elif segments == 1:
            states = [labels[rng.integers(len(labels))]]
        elif len(labels) == 2:
            if segments % 2 != 0:
                raise DomainError(
                    "two-label circular words must alternate; use an even length"
                )
            start = int(rng.integers(2))
            states = [labels[(start + i) % 2] for i in range(segments)]
        else:
            states = [labels[rng.integers(len(labels))]]
            for i in range(1, segments):
                banned = {states[-1]}
                if i == segments - 1:
                    banned.add(states[0])
                allowed = [s for s in labels if s not in banned]
                states.append(allowed[rng.integers(len(allowed))])
    else:
        pts = rng.uniform(0.0, 1.0, (segments, space.dim))
        states = [tuple(float(x) for x in row) for row in pts]
        for i in range(segments):
            while segments > 1 and states[i] == states[(i - 1) % segments]:
                states[i] = tuple(float(x) for x in rng.uniform(0.0, 1.0, space.dim))
    return Loop.make(space, zip(states, holds))


def random_based_loop(space: StateSpace, segments: int, seed: int) -> BasedLoop:
    """A random loop with a valid basepoint placed inside a random segment."""
    loop = generate_random_loop(space, segments, seed)
    rng = np.random.default_rng(seed + 0x9E3779B9)
    bounds = loop.boundaries()
    k = int(rng.integers(len(loop.word)))
    frac = rng.uniform(0.1, 0.9)
    return BasedLoop(loop, bounds[k] + frac * loop.word[k].hold)


def canonical_based(loop: Loop) -> BasedLoop:
    """Deterministic representative: basepoint at the midpoint of the first
    canonical segment."""
    c = loop.canonical()
    return BasedLoop(c, 0.5 * c.word[0].hold)


def loop_of_based(l: BasedLoop) -> Loop:
    return l.loop
