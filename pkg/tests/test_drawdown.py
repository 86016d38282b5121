import numpy as np
import pytest

import follmer as fl
from follmer.drawdown import affine_u, compose_u, identity_u


@pytest.fixture(scope="module")
def positive_sample():
    seq = fl.dyadic_sequence(1.0, 6, 12)
    w = fl.DyadicBrownianGenerator(seed=11, sigma=0.3).generate(seq.grid)
    s = fl.GridPath(seq.grid, 2.0 * np.exp(w.x))
    return seq, s


class TestAzemaYor:
    def test_identity_reproduces_path(self, positive_sample):
        seq, s = positive_sample
        rep = fl.azema_yor_path(identity_u(0.0), s, seq)
        assert np.array_equal(rep.path.x, s.x)
        assert rep.integral_residual == pytest.approx(0.0, abs=1e-12)

    def test_affine_exact(self, positive_sample):
        _, s = positive_sample
        rep = fl.azema_yor_path(affine_u(2.0, 1.0, 0.0), s)
        assert np.allclose(rep.path.x, 2.0 * s.x + 1.0, rtol=1e-14)

    def test_square_formula_and_residual(self, positive_sample):
        seq, s = positive_sample
        u = fl.MonotoneC2Function(
            value=lambda y: y**2,
            d1=lambda y: 2.0 * y,
            d2=lambda y: 2.0 + 0.0 * y,
            domain_start=0.0,
            name="square",
        )
        rep = fl.azema_yor_path(u, s, seq, tol=fl.STOCHASTIC_TOL)
        sbar, _ = fl.running_maximum(s)
        expect = 2.0 * sbar.x * s.x - sbar.x**2
        assert np.allclose(rep.path.x, expect, rtol=1e-13)
        assert rep.trend.converged

    def test_discontinuous_max_rejected(self):
        seq = fl.dyadic_sequence(1.0, 2, 6)
        x = fl.StepGenerator(c=1.0, t0=0.5, x0=1.0).generate(seq.grid)
        with pytest.raises(ValueError):
            fl.azema_yor_path(identity_u(0.0), x)

    def test_jump_law_of_azema_yor_path(self):
        # a downward jump keeps the maximum continuous; dM = U'(max) dX
        seq = fl.dyadic_sequence(1.0, 3, 9)
        base = fl.DyadicBrownianGenerator(seed=6, sigma=0.2, x0=3.0).generate(seq.grid)
        x = fl.add_paths(base, fl.StepGenerator(c=-0.5, t0=0.5).generate(seq.grid))
        u = affine_u(3.0, -1.0, 0.0)
        rep = fl.azema_yor_path(u, x)
        i = seq.grid.index_of(0.5)
        assert rep.path.jump_at(i)[0] == pytest.approx(3.0 * (-0.5), rel=1e-14)


class TestMaxIdentity:
    def test_identity(self, positive_sample):
        _, s = positive_sample
        rep = fl.max_identity_check(identity_u(0.0), s)
        assert rep.max_identity_sup == 0.0
        assert rep.max_still_continuous

    def test_affine_composition_exact(self, positive_sample):
        _, s = positive_sample
        rep = fl.max_identity_check(affine_u(2.0, 1.0, 0.0), s, affine_u(1.5, 0.2, 0.0))
        assert rep.max_identity_sup == 0.0
        assert rep.composition_sup == pytest.approx(0.0, abs=1e-12)

    def test_power_log_pair(self, positive_sample):
        _, s = positive_sample
        power = fl.MonotoneC2Function(
            value=lambda y: y**1.5,
            d1=lambda y: 1.5 * y**0.5,
            d2=lambda y: 0.75 / y**0.5,
            domain_start=0.0,
            name="p15",
        )
        logu = fl.MonotoneC2Function(
            value=np.log, d1=lambda y: 1.0 / y, d2=lambda y: -1.0 / y**2,
            domain_start=0.1, name="log",
        )
        rep = fl.max_identity_check(logu, s, power)
        assert rep.max_identity_sup <= 1e-12
        assert rep.composition_sup <= 1e-10

    def test_decreasing_u_rejected(self, positive_sample):
        _, s = positive_sample
        with pytest.raises(ValueError):
            fl.max_identity_check(affine_u(-1.0, 0.0, 0.0), s)


class TestFloorTransforms:
    def test_zero_floor_closed_form(self):
        tr = fl.floor_to_transform(fl.floor_zero(2.0), a=2.0)
        ys = np.linspace(2.0, 7.0, 101)
        assert np.allclose(tr.V(ys), ys, rtol=1e-11)
        assert np.allclose(tr.U(ys), ys, rtol=1e-11)

    def test_proportional_closed_form(self):
        alpha = 0.3
        a, a_star = 2.0, 1.5
        tr = fl.floor_to_transform(fl.floor_proportional(alpha, a_star), a=a)
        ys = np.linspace(a_star, 6.0, 101)
        expect = a * (ys / a_star) ** (1.0 / (1.0 - alpha))
        assert np.allclose(tr.V(ys), expect, rtol=1e-10)
        xs = tr.V(ys)
        assert np.allclose(tr.U(xs), a_star * (xs / a) ** (1.0 - alpha), rtol=1e-10)

    def test_unit_margin_closed_form(self):
        a, a_star = 2.0, 1.0
        tr = fl.floor_to_transform(fl.floor_constant_margin(1.0, a_star), a=a)
        ys = np.linspace(a_star, 5.0, 101)
        assert np.allclose(tr.V(ys), a * np.exp(ys - a_star), rtol=1e-11)
        xs = tr.V(ys)
        assert np.allclose(tr.U(xs), a_star + np.log(xs / a), rtol=1e-11)

    def test_round_trip_tolerance(self):
        tr = fl.floor_to_transform(fl.floor_proportional(0.5, 1.0), a=1.0, y_hint=8.0)
        ys = np.linspace(1.0, 8.0, 1000)
        assert np.max(np.abs(tr.U(tr.V(ys)) - ys)) <= 1e-9 * (1.0 + np.max(np.abs(ys)))

    def test_vanishing_margin_rejected(self):
        bad = fl.FloorFunction(w=lambda y: y, dw=lambda y: np.ones_like(y), a_star=1.0)
        with pytest.raises(ValueError):
            fl.floor_to_transform(bad, a=1.0)

    def test_derivatives_consistent(self):
        tr = fl.floor_to_transform(fl.floor_proportional(0.4, 1.0), a=2.0, y_hint=6.0)
        tr.V.validate(np.linspace(1.1, 5.0, 50))
        tr.U.validate(np.linspace(tr.V(np.array([1.1]))[0], tr.V(np.array([5.0]))[0], 50))

    def test_table_floor(self):
        ys = np.linspace(1.0, 6.0, 30)
        w = fl.floor_from_table(ys, 0.25 * ys)
        tr = fl.floor_to_transform(w, a=2.0)
        samples = np.linspace(1.0, 5.0, 60)
        expect = 2.0 * (samples / 1.0) ** (1.0 / 0.75)
        assert np.allclose(tr.V(samples), expect, rtol=1e-6)


class TestSolveDrawdown:
    def test_zero_floor_identity(self, positive_sample):
        seq, s = positive_sample
        floor = fl.floor_zero(a_star=float(s.x[0]))
        rep = fl.solve_drawdown(floor, s, seq, tol=fl.STOCHASTIC_TOL)
        assert np.allclose(rep.y.x, s.x, rtol=1e-11)
        assert rep.constraint_ok

    def test_proportional_floor(self, positive_sample):
        seq, s = positive_sample
        floor = fl.floor_proportional(0.3, a_star=float(s.x[0]))
        rep = fl.solve_drawdown(floor, s, seq, tol=fl.STOCHASTIC_TOL)
        assert rep.constraint_ok
        assert rep.trend.converged
        ybar, _ = fl.running_maximum(rep.y)
        lv = fl.left_values(rep.y)[:, 0]
        assert np.min(np.minimum(rep.y.x, lv) - floor(ybar.x)) > 0.0

    def test_round_trip_inverse_direction(self, positive_sample):
        seq, s = positive_sample
        floor = fl.floor_constant_margin(1.0, a_star=float(s.x[0]))
        rep = fl.solve_drawdown(floor, s, seq, tol=fl.STOCHASTIC_TOL)
        back = fl.azema_yor_path(rep.transform.V, rep.y).path
        assert np.max(np.abs(back.x - s.x)) <= 1e-6

    def test_nonpositive_path_rejected(self):
        seq = fl.dyadic_sequence(1.0, 2, 6)
        x = fl.FormulaGenerator(lambda t: t - 0.5).generate(seq.grid)
        with pytest.raises(ValueError):
            fl.solve_drawdown(fl.floor_zero(0.1), x, seq)


class TestUniquenessProbe:
    def test_identical_paths(self, positive_sample):
        seq, s = positive_sample
        rep = fl.uniqueness_probe(s, s, seq, 1.0, tol=fl.STOCHASTIC_TOL, qv_tol=fl.STOCHASTIC_TOL)
        assert rep.integral_distance == 0.0
        assert rep.path_distance == 0.0
        assert rep.consistent

    def test_scaled_path_precondition_rejected(self, positive_sample):
        seq, s = positive_sample
        s2 = fl.scale_path(s, 2.0)
        with pytest.raises(ValueError):
            fl.uniqueness_probe(s, s2, seq, 1.0)

    def test_step_reconstruction(self):
        seq = fl.dyadic_sequence(1.0, 2, 9)
        sv = np.full(len(seq.grid), 2.0)
        i = seq.grid.index_of(0.5)
        sv[i:] = 3.0
        s = fl.FVPath(seq.grid, sv, {i: 1.0})
        rep = fl.uniqueness_probe(s, s, seq, 1.0)
        assert rep.reconstruction_x <= 1e-12
        assert rep.consistent


def test_max_increment_identity_tends_to_zero(positive_sample):
    # sum (max - X) d(max) over grid increments vanishes with refinement
    # when the running maximum is continuous
    seq, s = positive_sample
    sbar, cont = fl.running_maximum(s)
    assert cont
    vals = []
    for p in seq:
        idx = p.indices
        m = sbar.x[idx]
        vals.append(float(np.sum((m[:-1] - s.x[idx[:-1]]) * np.diff(m))))
    assert abs(vals[-1]) < abs(vals[0]) + 1e-12
    assert abs(vals[-1]) < 5e-3


def test_compose_u_chain_rule():
    u = affine_u(2.0, 1.0, 0.0)
    f = fl.MonotoneC2Function(
        value=lambda y: y**2, d1=lambda y: 2 * y, d2=lambda y: 2.0 + 0 * y,
        domain_start=0.0, name="sq",
    )
    comp = compose_u(u, f)
    ys = np.linspace(0.5, 3.0, 7)
    assert np.allclose(comp(ys), 2 * ys**2 + 1)
    comp.validate(ys)
