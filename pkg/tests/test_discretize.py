import math

import numpy as np
import pytest

from loopfield import (
    BasedLoop,
    DomainError,
    Loop,
    StateSpace,
    build_partition,
    circular_sup_distance,
    convergence_experiment,
    equals_up_to_rotation,
    finite_partition,
    induced_discrete_loop,
    occupation_measure,
    rotate,
    trace_time_change,
    verify_trace_identity,
)

from conftest import based_mid_longest, random_loop


def euclid_based(rng, plane, max_segments=6):
    return based_mid_longest(random_loop(plane, rng, max_segments))


# ------------------------------------------------------------ build_partition

def test_partition_two_points(plane1d=StateSpace.euclidean(1)):
    loop = Loop.make(plane1d, [((0.0,), 1.0), ((1.0,), 2.0)])
    part = build_partition(occupation_measure(loop), 0.5, 0)
    assert len(part.cells) == 2
    for cell in part.cells:
        assert math.dist(cell.lo, cell.hi) < 0.5
    assert part.locate((0.0,)) is not None and part.locate((1.0,)) is not None


def test_partition_single_point():
    sp = StateSpace.euclidean(2)
    loop = Loop.make(sp, [((0.3, 0.7), 2.0)])
    part = build_partition(occupation_measure(loop), 0.25, 1)
    assert len(part.cells) == 1
    assert part.cells[0].contains((0.3, 0.7))
    assert part.representatives[0] == (0.3, 0.7)


def test_partition_bullets_on_random_instances(plane):
    rng = np.random.default_rng(3)
    for trial in range(25):
        bl = euclid_based(rng, plane)
        m = occupation_measure(bl.loop)
        eps = float(rng.uniform(0.1, 0.6))
        part = build_partition(m, eps, trial)
        # diameters below eps
        for cell in part.cells:
            assert math.dist(cell.lo, cell.hi) < eps
        # pairwise gap at least twice the margin
        for i in range(len(part.cells)):
            for j in range(i + 1, len(part.cells)):
                a, b = part.cells[i], part.cells[j]
                gap = math.sqrt(sum(
                    max(a.lo[k] - b.hi[k], b.lo[k] - a.hi[k], 0.0) ** 2
                    for k in range(2)
                ))
                assert gap >= 2 * part.margin - 1e-12
        # zero leaked mass: every support point sits in a cell, clear of edges
        for pt in m.entries:
            assert part.locate(pt) is not None
            assert not part.touches_boundary(pt)
        # representatives live in their cells
        for cell, rep in zip(part.cells, part.representatives):
            assert cell.contains(rep)


def test_partition_rejects_bad_eps(plane):
    loop = Loop.make(plane, [((0.1, 0.1), 1.0), ((0.9, 0.9), 1.0)])
    with pytest.raises(DomainError):
        build_partition(occupation_measure(loop), 0.0, 0)


# ---------------------------------------------------------- trace_time_change

def test_time_change_all_inside(xy_space):
    bl = BasedLoop(Loop.make(xy_space, [("x", 1.0), ("y", 2.0)]), 0.5)
    tc = trace_time_change(bl, finite_partition(xy_space))
    assert tc.t_eps == bl.duration
    for u in np.linspace(0, bl.duration, 7):
        assert tc.A_at(float(u)) == pytest.approx(float(u), abs=1e-12)


def test_time_change_partial(xy_space):
    bl = BasedLoop(Loop.make(xy_space, [("x", 1.0), ("y", 2.0)]), 0.5)
    part = finite_partition(xy_space, keep=["x"])
    tc = trace_time_change(bl, part)
    assert tc.t_eps == 1.0
    # A(sigma(s)) = s on [0, t_eps)
    for s in np.linspace(0, 0.999, 9):
        assert tc.A_at(tc.sigma_at(float(s))) == pytest.approx(float(s), abs=1e-12)
    # sigma skips the y-excursion
    assert tc.sigma_at(0.5 + 1e-9) >= 0.5
    assert tc.sigma_at(0.0) == pytest.approx(0.0)


def test_time_change_all_outside(xy_space):
    sp3 = StateSpace.finite(["x", "y", "z"])
    bl = BasedLoop(Loop.make(sp3, [("x", 1.0), ("y", 2.0)]), 0.5)
    part = finite_partition(sp3, keep=["z"])
    tc = trace_time_change(bl, part)
    assert tc.t_eps == 0.0
    with pytest.raises(DomainError):
        tc.sigma_at(0.0)
    with pytest.raises(DomainError):
        induced_discrete_loop(bl, part)


def test_time_change_identities_random(plane):
    rng = np.random.default_rng(11)
    for trial in range(15):
        bl = euclid_based(rng, plane)
        m = occupation_measure(bl.loop)
        part = build_partition(m, float(rng.uniform(0.15, 0.5)), trial)
        tc = trace_time_change(bl, part)
        t, te = bl.duration, tc.t_eps
        assert te == pytest.approx(t, abs=1e-12)  # zero leak: full trace
        for s in rng.uniform(0, te * 0.999, 6):
            s = float(s)
            assert tc.sigma_at(s) >= s - 1e-12
            assert tc.A_at(tc.sigma_at(s)) == pytest.approx(s, abs=1e-12)
        for u in rng.uniform(0, t, 4):
            u = float(u)
            assert tc.A_at(u + t) == pytest.approx(te + tc.A_at(u), abs=1e-9)
        assert tc.sigma_at(0.25 * te + te) == pytest.approx(
            tc.sigma_at(0.25 * te) + t, abs=1e-9
        )


def test_sigma_after_A_is_identity_off_excursions(xy_space):
    bl = BasedLoop(Loop.make(xy_space, [("x", 1.0), ("y", 2.0)]), 0.5)
    part = finite_partition(xy_space, keep=["x"])
    tc = trace_time_change(bl, part)
    # inside runs: sigma(A(u)) == u; inside excursions it jumps past them
    for u in (0.0, 0.1, 0.3, 0.49, 2.7, 2.9):
        assert tc.sigma_at(tc.A_at(u)) == pytest.approx(u, abs=1e-12)
    for u in (0.6, 1.2, 2.0):
        assert tc.sigma_at(tc.A_at(u)) == pytest.approx(2.5, abs=1e-12)


def test_sigma_decreases_to_identity(xy_space):
    # on a ladder where cells eventually cover all support, sigma -> identity
    sp3 = StateSpace.finite(["x", "y", "z"])
    bl = BasedLoop(Loop.make(sp3, [("x", 1.0), ("y", 1.0), ("z", 1.0)]), 0.5)
    parts = [
        finite_partition(sp3, keep=["x"]),
        finite_partition(sp3, keep=["x", "y"]),
        finite_partition(sp3, keep=["x", "y", "z"]),
    ]
    svals = []
    for part in parts:
        tc = trace_time_change(bl, part)
        svals.append([tc.sigma_at(s) for s in (0.0, 0.2, 0.4)])
    for row_prev, row_next in zip(svals, svals[1:]):
        assert all(b <= a + 1e-12 for a, b in zip(row_prev, row_next))
    assert svals[-1] == pytest.approx([0.0, 0.2, 0.4], abs=1e-12)


# ----------------------------------------------------- induced_discrete_loop

def test_induced_examples(xy_space):
    # already supported on representatives with all cells kept
    bl = BasedLoop(Loop.make(xy_space, [("x", 1.0), ("y", 2.0)]), 0.5)
    ind = induced_discrete_loop(bl, finite_partition(xy_space))
    assert equals_up_to_rotation(ind, bl.loop).equal

    # circular merge: based walk emits (x,1),(y,2),(x,3)
    bl2 = BasedLoop(Loop.make(xy_space, [("x", 4.0), ("y", 2.0)]), 3.0)
    ind2 = induced_discrete_loop(bl2, finite_partition(xy_space))
    assert equals_up_to_rotation(
        ind2, Loop.make(xy_space, [("x", 4.0), ("y", 2.0)])
    ).equal

    # only x kept: constant loop of duration 1
    ind3 = induced_discrete_loop(bl, finite_partition(xy_space, keep=["x"]))
    assert len(ind3.word) == 1 and ind3.word[0].hold == 1.0


def test_induced_stays_close_to_trace(plane):
    # sup_s d(induced(s), original(sigma(s))) is the max over inside
    # segments of the distance from the state to its cell representative
    from loopfield import based_segments

    rng = np.random.default_rng(13)
    for trial in range(15):
        bl = euclid_based(rng, plane)
        m = occupation_measure(bl.loop)
        eps = float(rng.uniform(0.15, 0.5))
        part = build_partition(m, eps, trial)
        worst = 0.0
        for state, _hold in based_segments(bl):
            idx = part.locate(state)
            if idx is None:
                continue
            worst = max(worst, bl.space.distance(part.representatives[idx], state))
        assert worst <= eps


# ------------------------------------------------------- verify_trace_identity

def test_trace_identity_examples(xy_space):
    bl = BasedLoop(Loop.make(xy_space, [("x", 1.0), ("y", 2.0)]), 0.5)
    assert verify_trace_identity(bl, finite_partition(xy_space), 3)
    assert verify_trace_identity(bl, finite_partition(xy_space, keep=["x"]), 3)
    sp3 = StateSpace.finite(["x", "y", "z"])
    bl3 = BasedLoop(Loop.make(sp3, [("x", 1.0), ("y", 2.0)]), 0.5)
    assert verify_trace_identity(bl3, finite_partition(sp3, keep=["x", "y"]), 3)


def test_trace_identity_random_euclidean(plane):
    rng = np.random.default_rng(17)
    for trial in range(20):
        bl = euclid_based(rng, plane)
        part = build_partition(
            occupation_measure(bl.loop), float(rng.uniform(0.1, 0.6)), trial
        )
        assert verify_trace_identity(bl, part, 3)


# ---------------------------------------------------- convergence_experiment

def test_convergence_identical_loops(plane):
    rng = np.random.default_rng(19)
    bl = euclid_based(rng, plane)
    rep = convergence_experiment(bl, bl, [0.5, 0.25], seed=5)
    assert all(r.equal for r in rep.rows)
    assert rep.limiting_offset == pytest.approx(0.0, abs=1e-12)
    assert rep.final_sup_distance == 0.0


def separated_euclid_based(rng, plane, min_gap=0.1, max_segments=6):
    """Based loop with >= 2 segments and pairwise state gaps above min_gap,
    so no two states can share a cell at the finest ladder level."""
    while True:
        loop = random_loop(plane, rng, max_segments)
        if len(loop.word) < 2:
            continue
        states = [seg.state for seg in loop.word]
        ok = all(
            math.dist(a, b) > min_gap
            for i, a in enumerate(states)
            for b in states[i + 1 :]
            if a != b
        )
        if ok:
            return based_mid_longest(loop)


def test_convergence_rotated_pair(plane):
    rng = np.random.default_rng(23)
    for trial in range(10):
        bl1 = separated_euclid_based(rng, plane)
        t = bl1.duration
        r = None
        while r is None:
            cand = float(rng.uniform(0.05, 0.95)) * t
            if rotate(bl1, cand) is not None:
                r = cand
        bl2 = rotate(bl1, r)
        rep = convergence_experiment(bl1, bl2, [0.5, 0.25, 0.125], seed=trial)
        assert all(row.equal for row in rep.rows)
        expect = (t - r) % t
        err = abs(rep.limiting_offset - expect)
        assert min(err, t - err) <= 0.125
        assert rep.final_sup_distance == 0.0


def test_convergence_different_measures(plane):
    a = BasedLoop(Loop.make(plane, [((0.1, 0.1), 1.0), ((0.9, 0.9), 1.0)]), 0.5)
    b = BasedLoop(Loop.make(plane, [((0.1, 0.1), 1.0), ((0.5, 0.5), 1.0)]), 0.5)
    rep = convergence_experiment(a, b, [0.3, 0.15], seed=2)
    assert all(not r.equal for r in rep.rows)
    assert rep.limiting_offset is None


def test_convergence_requires_decreasing_ladder(plane):
    bl = BasedLoop(Loop.make(plane, [((0.1, 0.1), 1.0), ((0.9, 0.9), 1.0)]), 0.5)
    with pytest.raises(DomainError):
        convergence_experiment(bl, bl, [0.25, 0.5])


def test_circular_sup_distance_detects_shift(plane):
    bl = BasedLoop(Loop.make(plane, [((0.0, 0.0), 1.0), ((1.0, 0.0), 1.0)]), 0.5)
    assert circular_sup_distance(bl, bl, 0.0) == 0.0
    assert circular_sup_distance(bl, bl, 1.0) == 1.0
