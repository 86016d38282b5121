import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import follmer as fl
from follmer.paths import read_path_csv, reciprocal_path, write_path_csv


def test_grid_invariants():
    with pytest.raises(ValueError):
        fl.TimeGrid(np.array([0.1, 0.5, 1.0]))  # must start at 0
    with pytest.raises(ValueError):
        fl.TimeGrid(np.array([0.0, 0.5, 0.5]))  # strictly increasing
    with pytest.raises(ValueError):
        fl.TimeGrid(np.array([0.0]))  # length >= 2
    g = fl.dyadic_grid(1.0, 3)
    assert g.T == 1.0 and len(g) == 9
    assert g.index_of(0.375) == 3
    with pytest.raises(KeyError):
        g.index_of(0.3)  # membership is exact, never fuzzy


def test_jump_at_zero_forbidden():
    g = fl.dyadic_grid(1.0, 2)
    with pytest.raises(ValueError):
        fl.GridPath(g, np.zeros(5), {0: 1.0})


class TestLeftLimit:
    def test_step_path_pre_jump_value(self):
        g = fl.dyadic_grid(1.0, 4)
        x = fl.StepGenerator(c=2.0, t0=0.5).generate(g)
        i = g.index_of(0.5)
        assert fl.eval_left_limit(x, i)[0] == 0.0

    def test_origin_convention(self):
        g = fl.dyadic_grid(1.0, 3)
        x = fl.StepGenerator(c=1.5, t0=0.25).generate(g)
        assert fl.eval_left_limit(x, 0)[0] == x.values[0, 0]

    def test_continuous_path_left_limit_is_value(self):
        g = fl.dyadic_grid(1.0, 5)
        x = fl.FormulaGenerator(lambda t: np.sin(t)).generate(g)
        for i in (0, 7, 31):
            assert fl.eval_left_limit(x, i)[0] == x.values[i, 0]

    def test_out_of_range(self):
        g = fl.dyadic_grid(1.0, 2)
        x = fl.GridPath(g, np.zeros(5))
        with pytest.raises(IndexError):
            fl.eval_left_limit(x, 5)

    def test_value_minus_left_limit_is_stored_jump(self):
        g = fl.dyadic_grid(1.0, 6)
        x = fl.add_paths(
            fl.DyadicBrownianGenerator(seed=2).generate(g),
            fl.CompoundJumpGenerator(seed=2, intensity=4.0).generate(g),
        )
        lv = fl.left_values(x)
        for i in range(len(g)):
            assert x.values[i, 0] - lv[i, 0] == x.jump_at(i)[0]


class TestRunningMaximum:
    def test_increasing_path(self):
        g = fl.dyadic_grid(1.0, 4)
        x = fl.FormulaGenerator(lambda t: t).generate(g)
        m, cont = fl.running_maximum(x)
        assert cont and np.array_equal(m.x, x.x)

    def test_prefix_max(self):
        g = fl.TimeGrid(np.array([0.0, 1 / 3, 2 / 3, 1.0]))
        x = fl.GridPath(g, np.array([1.0, 0.5, 2.0, 1.5]))
        m, cont = fl.running_maximum(x)
        assert np.array_equal(m.x, [1.0, 1.0, 2.0, 2.0])
        assert cont  # no declared jumps at all

    def test_upward_jump_into_new_max_sets_flag(self):
        g = fl.dyadic_grid(1.0, 3)
        x = fl.StepGenerator(c=1.0, t0=0.5).generate(g)
        m, cont = fl.running_maximum(x)
        assert not cont
        assert g.index_of(0.5) in m.jumps

    def test_downward_jump_keeps_continuity(self):
        g = fl.dyadic_grid(1.0, 3)
        x = fl.StepGenerator(c=-1.0, t0=0.5, x0=2.0).generate(g)
        _, cont = fl.running_maximum(x)
        assert cont

    def test_idempotent(self):
        g = fl.dyadic_grid(1.0, 6)
        x = fl.DyadicBrownianGenerator(seed=5).generate(g)
        m, _ = fl.running_maximum(x)
        mm, _ = fl.running_maximum(m)
        assert np.array_equal(m.x, mm.x)


class TestTotalVariation:
    def test_monotone(self):
        g = fl.dyadic_grid(1.0, 4)
        a = fl.as_fv(fl.FormulaGenerator(lambda t: t).generate(g))
        assert fl.total_variation(a, 1.0) == pytest.approx(1.0)

    def test_zigzag(self):
        g = fl.TimeGrid(np.array([0.0, 0.5, 1.0]))
        a = fl.as_fv(fl.GridPath(g, np.array([0.0, 1.0, 0.0])))
        assert fl.total_variation(a, 1.0) == 2.0

    def test_constant(self):
        g = fl.dyadic_grid(1.0, 3)
        a = fl.as_fv(fl.GridPath(g, np.ones(9)))
        assert fl.total_variation(a, 1.0) == 0.0

    def test_beyond_horizon(self):
        g = fl.dyadic_grid(1.0, 3)
        a = fl.as_fv(fl.GridPath(g, np.ones(9)))
        with pytest.raises(ValueError):
            fl.total_variation(a, 1.5)


def test_fv_decomposition_exact():
    g = fl.dyadic_grid(1.0, 5)
    vals = np.sin(g.times).copy()
    i = g.index_of(0.5)
    vals[i:] += 0.7
    a = fl.FVPath(g, vals, {i: 0.7})
    c = a.continuous()
    d = a.discontinuous()
    assert not c.jumps
    assert np.array_equal(c.values + d.values, a.values)
    assert d.values[i, 0] == pytest.approx(0.7)


class TestGenerators:
    def test_step(self):
        g = fl.dyadic_grid(1.0, 4)
        x = fl.StepGenerator(c=2.0, t0=0.5).generate(g)
        i = g.index_of(0.5)
        assert x.jumps == {i: np.array([2.0])} or x.jump_at(i)[0] == 2.0
        assert x.values[i - 1, 0] == 0.0 and x.values[i, 0] == 2.0

    def test_dyadic_brownian_refinement_consistency(self):
        fine = fl.DyadicBrownianGenerator(seed=7).generate(fl.dyadic_grid(1.0, 9))
        coarse = fl.DyadicBrownianGenerator(seed=7).generate(fl.dyadic_grid(1.0, 6))
        assert np.array_equal(fine.x[::8], coarse.x)

    def test_same_seed_bit_identical(self):
        a = fl.DyadicBrownianGenerator(seed=42).generate(fl.dyadic_grid(1.0, 8))
        b = fl.DyadicBrownianGenerator(seed=42).generate(fl.dyadic_grid(1.0, 8))
        assert np.array_equal(a.x, b.x)

    def test_affine_combination_union_jumps(self):
        g = fl.dyadic_grid(1.0, 4)
        gen = fl.AffineCombinationGenerator(
            fl.StepGenerator(c=1.0, t0=0.25),
            fl.StepGenerator(c=2.0, t0=0.75),
            a=2.0,
            b=3.0,
        )
        x = gen.generate(g)
        assert x.jump_at(g.index_of(0.25))[0] == 2.0
        assert x.jump_at(g.index_of(0.75))[0] == 6.0

    def test_dyadic_generator_rejects_non_dyadic_grid(self):
        g = fl.TimeGrid(np.array([0.0, 0.3, 1.0]))
        with pytest.raises(ValueError):
            fl.DyadicBrownianGenerator(seed=1).generate(g)

    def test_geometric_positive_with_jumps(self):
        g = fl.dyadic_grid(1.0, 8)
        s = fl.GeometricGenerator(seed=3, jump_intensity=5.0, jump_size=0.3).generate(g)
        assert np.all(s.x > 0)
        assert np.all(fl.left_values(s)[:, 0] > 0)
        assert s.jumps


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    level=st.integers(2, 6),
    c=st.floats(-3, 3, allow_nan=False).filter(lambda v: v != 0),
)
def test_running_max_monotone_and_dominates(seed, level, c):
    g = fl.dyadic_grid(1.0, level)
    x = fl.add_paths(
        fl.DyadicBrownianGenerator(seed=seed).generate(g),
        fl.StepGenerator(c=c, t0=0.5).generate(g),
    )
    m, _ = fl.running_maximum(x)
    assert np.all(np.diff(m.x) >= 0)
    assert np.all(m.x >= x.x - 1e-15)


def test_reciprocal_path_declares_jumps():
    g = fl.dyadic_grid(1.0, 4)
    s = fl.StepGenerator(c=1.0, t0=0.5, x0=1.0).generate(g)
    r = reciprocal_path(s)
    i = g.index_of(0.5)
    assert r.jump_at(i)[0] == pytest.approx(0.5 - 1.0)


def test_csv_round_trip():
    g = fl.dyadic_grid(1.0, 3)
    x = fl.StepGenerator(c=2.5, t0=0.5, x0=-1.0).generate(g)
    buf = io.StringIO()
    write_path_csv(x, buf)
    buf.seek(0)
    y = read_path_csv(buf)
    assert np.array_equal(x.values, y.values)
    assert set(x.jumps) == set(y.jumps)
    assert np.array_equal(x.grid.times, y.grid.times)


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**31 - 1),
    jumps=st.lists(
        # jump sizes below one ulp of the values cannot round-trip floats
        st.tuples(
            st.integers(1, 31),
            st.floats(-2, 2, allow_nan=False).filter(lambda c: c == 0.0 or abs(c) > 1e-9),
        ),
        max_size=4,
        unique_by=lambda p: p[0],
    ),
)
def test_fv_decomposition_property(seed, jumps):
    g = fl.dyadic_grid(1.0, 5)
    vals = np.cumsum(np.random.default_rng(seed).uniform(-0.1, 0.1, len(g)))
    jmap = {}
    for i, c in jumps:
        if c != 0.0:
            vals[i:] += c
            jmap[i] = c
    a = fl.FVPath(g, vals, jmap)
    assert not a.continuous().jumps
    assert np.allclose(a.continuous().values + a.discontinuous().values, a.values, atol=1e-15)
    lv = fl.left_values(a)
    for i in range(len(g)):
        scale = max(1.0, abs(vals[i]))
        assert abs((vals[i] - lv[i, 0]) - a.jump_at(i)[0]) <= 4e-16 * scale
