import math

import numpy as np
import pytest

from loopfield import (
    Box,
    DomainError,
    Loop,
    Pattern,
    StateSpace,
    monte_carlo_occupation,
    multi_occupation,
    occupation_measure,
    rotate_pattern,
)

from conftest import random_loop


def test_rotate_pattern_examples():
    p = Pattern(("x", "y", "z"))
    assert rotate_pattern(p, 1).cells == ("y", "z", "x")
    assert rotate_pattern(p, 0) is not None and rotate_pattern(p, 0).cells == p.cells
    q = Pattern(("x", "y"))
    assert rotate_pattern(rotate_pattern(q, 1), 1).cells == ("x", "y")
    with pytest.raises(DomainError):
        rotate_pattern(p, 3)


def test_multi_occupation_examples(xy_space):
    const = Loop.make(StateSpace.finite(["x"]), [("x", 2.0)])
    assert multi_occupation(const, Pattern(("x", "x"))) == 4.0

    l = Loop.make(xy_space, [("x", 1.0), ("y", 2.0)])
    # frozen from the Monte Carlo oracle (10^7 samples agree within 1%)
    assert math.isclose(multi_occupation(l, Pattern(("x", "y"))), 2.0, rel_tol=1e-12)
    assert math.isclose(multi_occupation(l, Pattern(("y", "x"))), 2.0, rel_tol=1e-12)


def test_simplex_volume_law():
    sp = StateSpace.finite(["x"])
    t = 1.7
    loop = Loop.make(sp, [("x", t)])
    for n in range(1, 6):
        value = multi_occupation(loop, Pattern(("x",) * n))
        expected = t**n / math.factorial(n - 1)
        assert abs(value - expected) <= 1e-12 * expected


def test_pattern_rotation_invariance(xyz_space):
    rng = np.random.default_rng(31)
    for _ in range(60):
        loop = random_loop(xyz_space, rng)
        n = int(rng.integers(1, 5))
        cells = tuple(
            xyz_space.labels[int(rng.integers(3))] for _ in range(n)
        )
        base = multi_occupation(loop, Pattern(cells))
        for j in range(n):
            rotated = multi_occupation(loop, rotate_pattern(Pattern(cells), j))
            assert abs(rotated - base) <= 1e-12 * max(abs(base), 1e-12)


def test_loop_rotation_invariance(xyz_space):
    rng = np.random.default_rng(37)
    for _ in range(60):
        loop = random_loop(xyz_space, rng)
        n = int(rng.integers(1, 4))
        cells = tuple(
            xyz_space.labels[int(rng.integers(3))] for _ in range(n)
        )
        base = multi_occupation(loop, Pattern(cells))
        for k in range(len(loop.word)):
            shifted = multi_occupation(loop.rotated_word(k), Pattern(cells))
            assert abs(shifted - base) <= 1e-12 * max(abs(base), 1e-12)


def test_single_entry_matches_occupation_measure(xyz_space):
    rng = np.random.default_rng(41)
    for _ in range(30):
        loop = random_loop(xyz_space, rng)
        m = occupation_measure(loop)
        for x in xyz_space.labels:
            expected = m.entries.get(x, 0.0)
            assert multi_occupation(loop, Pattern((x,))) == pytest.approx(
                expected, abs=1e-14
            )


def test_scaling_covariance(xyz_space):
    rng = np.random.default_rng(43)
    for _ in range(25):
        loop = random_loop(xyz_space, rng)
        c = float(rng.uniform(0.3, 3.0))
        scaled = loop.scaled(c)
        for n in range(1, 4):
            cells = tuple(
                xyz_space.labels[int(rng.integers(3))] for _ in range(n)
            )
            v = multi_occupation(loop, Pattern(cells))
            vs = multi_occupation(scaled, Pattern(cells))
            assert abs(vs - c**n * v) <= 1e-10 * max(abs(vs), c**n * abs(v), 1e-12)


def test_occupation_measure_examples(xy_space):
    l = Loop.make(xy_space, [("x", 1.0), ("y", 2.0)])
    m = occupation_measure(l)
    assert m.entries == {"x": 1.0, "y": 2.0} and m.total == 3.0

    const = Loop.make(StateSpace.finite(["x"]), [("x", 5.0)])
    assert occupation_measure(const).entries == {"x": 5.0}

    plane = StateSpace.euclidean(1)
    p, q = (0.25,), (0.75,)
    le = Loop.make(plane, [(p, 1.0), (q, 2.0), (p, 3.0), (q, 0.5)])
    m2 = occupation_measure(le)
    assert m2.entries[p] == 4.0 and m2.entries[q] == 2.5


def test_occupation_measure_cells_disjointness(plane):
    l = Loop.make(plane, [((0.1, 0.1), 1.0), ((0.9, 0.9), 2.0)])
    a = Box((0.0, 0.0), (0.5, 0.5))
    b = Box((0.4, 0.4), (1.0, 1.0))
    with pytest.raises(DomainError):
        occupation_measure(l, [a, b])
    c = Box((0.5, 0.5), (1.0, 1.0))
    m = occupation_measure(l, [a, c])
    assert m.entries[a] == 1.0 and m.entries[c] == 2.0


def test_monte_carlo_examples(xy_space):
    const = Loop.make(StateSpace.finite(["x"]), [("x", 2.0)])
    est, err = monte_carlo_occupation(const, Pattern(("x",)), 1000, 3)
    assert est == 2.0 and err == 0.0

    l = Loop.make(xy_space, [("x", 1.0), ("y", 2.0)])
    est, err = monte_carlo_occupation(l, Pattern(("x", "y")), 200_000, 11)
    assert abs(est - 2.0) <= 3 * err

    never = monte_carlo_occupation(
        Loop.make(xy_space, [("x", 1.0), ("y", 2.0)]), Pattern(("x", "x")), 100, 5
    )
    # (x,x) is visited; use a genuinely unvisited pattern over a third label
    sp3 = StateSpace.finite(["x", "y", "z"])
    l3 = Loop.make(sp3, [("x", 1.0), ("y", 2.0)])
    est, err = monte_carlo_occupation(l3, Pattern(("z",)), 1000, 5)
    assert est == 0.0 and err == 0.0


def test_monte_carlo_ten_million_sample_oracle(xy_space):
    l = Loop.make(xy_space, [("x", 1.0), ("y", 2.0)])
    est, err = monte_carlo_occupation(l, Pattern(("x", "y")), 10_000_000, 17)
    assert abs(est - 2.0) <= 3 * err
    assert abs(est - 2.0) <= 0.01 * 2.0


def test_monte_carlo_determinism(xy_space):
    l = Loop.make(xy_space, [("x", 1.0), ("y", 2.0)])
    a = monte_carlo_occupation(l, Pattern(("x", "y")), 10_000, 21)
    b = monte_carlo_occupation(l, Pattern(("x", "y")), 10_000, 21)
    assert a == b


def test_box_membership_half_open(plane):
    box = Box((0.0, 0.0), (1.0, 1.0))
    assert box.contains((0.0, 0.5))
    assert not box.contains((1.0, 0.5))
    loop = Loop.make(plane, [((0.0, 0.0), 1.0), ((1.0, 1.0), 1.0)])
    assert multi_occupation(loop, Pattern((box,))) == 1.0


def test_incompatible_pattern_rejected(xy_space, plane):
    l = Loop.make(xy_space, [("x", 1.0), ("y", 2.0)])
    with pytest.raises(DomainError):
        multi_occupation(l, Pattern(("q",)))
    with pytest.raises(DomainError):
        multi_occupation(l, Pattern((Box((0.0,), (1.0,)),)))
    le = Loop.make(plane, [((0.1, 0.1), 1.0), ((0.9, 0.9), 2.0)])
    with pytest.raises(DomainError):
        multi_occupation(le, Pattern(("x",)))


def test_empty_pattern_rejected():
    with pytest.raises(DomainError):
        Pattern(())
