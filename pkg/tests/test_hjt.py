import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from polysymp.dynamics import KGParams, PlaneWave, kg_hamiltonian
from polysymp.exterior import Metric
from polysymp.hjt import (
    CONDITIONS,
    SFamily,
    TMap,
    check_T_conditions,
    exactness_residuals,
    hj_residual,
    kg_adapted,
    kg_S,
    kg_S_family,
    no_go_probe,
    no_go_system,
)
from polysymp.phase_space import PhaseSpaceShape, ScalarField, random_polynomial


class ZeroField:
    def __init__(self, n, c=0.0):
        self.n, self.c = n, c

    def value(self, x):
        return self.c

    def grad(self, x):
        return np.zeros(self.n)

    def hessian(self, x):
        return np.zeros((self.n, self.n))

    def third(self, x):
        return np.zeros((self.n,) * 3)


def zero_tmap(n, N):
    return TMap(n, N, lambda x, v: (np.zeros((n, N)), 0.0))


def test_free_field_constant_solution():
    p = KGParams(2, 0.0)
    res = check_T_conditions(zero_tmap(2, 1), kg_hamiltonian(p), [0.3, 0.1], [2.0])
    assert max(res) == 0.0


def test_wrong_energy_component_detected():
    p = KGParams(2, 0.0)
    bad = TMap(2, 1, lambda x, v: (np.zeros((2, 1)), math.sin(x[0])))
    for x0 in np.linspace(-0.5, 0.5, 5):
        res = check_T_conditions(bad, kg_hamiltonian(p), [x0, 0.0], [1.0])
        assert res.energy_gradient > 0.8
        assert res.momentum_gradient == res.field_divergence == 0.0


def test_records_schema():
    res = check_T_conditions(zero_tmap(1, 1), kg_hamiltonian(KGParams(1, 0.0)), [0.0], [0.0])
    recs = res.records([0.0, 0.0], 1e-8)
    assert [r["condition"] for r in recs] == list(CONDITIONS)
    assert all(set(r) == {"condition", "point", "residual", "pass"} and r["pass"] for r in recs)


def test_hj_trivial():
    s = PhaseSpaceShape(2, 1, extended=False)
    HH = ScalarField(s, lambda y: 0.0)
    S = SFamily(2, 1, lambda x, v: np.array([3.0, -1.0]))
    assert hj_residual(S, HH, [0.1, 0.2], [0.4]) < 1e-12


def test_oscillator_action():
    # n = 1 oscillator: S(t, v) = -1/2 v^2 tan t solves d_t S + 1/2 (d_v S)^2 + 1/2 v^2 = 0
    HH = kg_hamiltonian(KGParams(1, 1.0))
    t, v = sp.symbols("t v")
    Ssym = -sp.Rational(1, 2) * v ** 2 * sp.tan(t)
    assert sp.simplify(sp.diff(Ssym, t) + sp.diff(Ssym, v) ** 2 / 2 + v ** 2 / 2) == 0
    f = sp.lambdify((t, v), Ssym)
    S = SFamily(1, 1, lambda x, w: np.array([f(x[0], w[0])]))
    for tt, vv in [(0.1, 1.0), (0.7, -2.0), (-1.2, 0.3)]:
        assert hj_residual(S, HH, [tt], [vv]) < 1e-8


def test_kg_S_simple_values():
    p = KGParams(2, 1.0)
    assert not kg_S(ZeroField(2), p, [0.2, 0.3], [1.5]).any()
    w = PlaneWave((0.7,), p)
    x = np.array([0.4, 1.1])
    assert np.allclose(kg_S(w, p, x, [0.5 * w.value(x)]), 0.0)


def test_kg_S_symbolic_oracle():
    m, kx = 1.0, 0.7
    w = PlaneWave((kx,), KGParams(2, m))
    t, x, v = sp.symbols("t x v")
    om = sp.sqrt(m ** 2 + kx ** 2)
    phi = sp.cos(-om * t + kx * x)
    ginv = [1, -1]
    exprs = [(v - phi / 2) * ginv[mu] * sp.diff(phi, var) for mu, var in enumerate((t, x))]
    pt = {t: 0.3, x: -0.8, v: 0.45}
    want = np.array([float(e.subs(pt)) for e in exprs])
    got = kg_S(w, w.params, [0.3, -0.8], [0.45])
    assert np.allclose(got, want, atol=1e-13)


@pytest.mark.parametrize("n,ks", [(2, (1.0,)), (4, (0.3, -0.2, 0.5))])
def test_kg_S_solves_hj_on_solution(n, ks):
    p = KGParams(n, 0.9)
    w = PlaneWave(ks, p)
    S = kg_S_family(w, p)
    HH = kg_hamiltonian(p)
    rng = np.random.default_rng(n)
    for _ in range(10):
        x = rng.uniform(-2, 2, n)
        assert hj_residual(S, HH, x, [w.value(x)]) < 1e-8
        # fd gradient variant agrees
        assert hj_residual(SFamily(n, 1, S.func), HH, x, [w.value(x)]) < 1e-8


def test_kg_family_derivatives_match_fd():
    p = KGParams(2, 1.0)
    w = PlaneWave((1.3,), p)
    x, v = np.array([0.2, -0.4]), np.array([0.6])
    for S in (kg_S_family(w, p), kg_adapted(w, p)[1]):
        fd = SFamily(2, 1, S.func)
        for a, b in zip(S.gradient(x, v), fd.gradient(x, v)):
            assert np.abs(a - b).max() < 1e-8
        assert np.abs(S.hessian(x, v) - SFamily(2, 1, S.func, S.gradient_fn).hessian(x, v)).max() < 1e-7


def test_adapted_chart_four_conditions_on_exact_wave():
    p = KGParams(2, 1.0)
    w = PlaneWave((1.0,), p)
    HH, S = kg_adapted(w, p)
    T = S.to_tmap()
    for x in ([0.3, 0.7], [1.1, -2.0]):
        assert max(check_T_conditions(T, HH, x, [0.0])) < 1e-12
        assert max(check_T_conditions(T, HH, x, [0.0], analytic=False)) < 1e-8
        asym, dht = exactness_residuals(S, HH, x, [0.0])
        assert asym == 0.0 and dht < 1e-8
    # off the leaf the divergence condition fails by m^2 w
    assert check_T_conditions(T, HH, [0.3, 0.7], [0.3]).field_divergence == pytest.approx(0.3)


def test_original_chart_momentum_condition_fails():
    # in the original trivialisation dHH/dp at (x, v, T) is g T - which is nonzero
    p = KGParams(2, 1.0)
    w = PlaneWave((1.0,), p)
    res = check_T_conditions(kg_S_family(w, p).to_tmap(), kg_hamiltonian(p), [0.3, 0.7], [w.value([0.3, 0.7])])
    assert res.momentum_gradient > 0.1
    assert res.compatibility < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(1, 2), st.integers(0, 2**32 - 1))
def test_gradient_tmaps_satisfy_compatibility(n, N, seed):
    rng = np.random.default_rng(seed)
    polys = [random_polynomial(n + N, rng, degree=4) for _ in range(n)]

    def func(x, v):
        z = np.concatenate([x, v])
        return np.array([P(z) for P in polys])

    def grad(x, v):
        G = np.array([P.gradient(np.concatenate([x, v])) for P in polys])
        return G[:, :n], G[:, n:]

    def hess(x, v):
        return np.array([P.hessian(np.concatenate([x, v])) for P in polys])

    S = SFamily(n, N, func, grad, hess)
    HH = ScalarField(PhaseSpaceShape(n, N, extended=False), lambda y: float(np.sum(y ** 2)), lambda y: 2 * y)
    x, v = rng.uniform(-1, 1, n), rng.uniform(-1, 1, N)
    res = check_T_conditions(S.to_tmap(), HH, x, v)
    assert res.compatibility < 1e-8
    assert exactness_residuals(S, HH, x, v)[0] < 1e-12
    fd = check_T_conditions(SFamily(n, N, func, grad).to_tmap(), HH, x, v)
    assert fd.compatibility < 1e-6


# no-go

def potential(shape, grad_at):
    n, N = shape.n, shape.N
    c = np.asarray(grad_at, dtype=float)

    def func(y):
        return float(c @ y[n:n + N])

    def partials(y):
        out = np.zeros(shape.dim)
        out[n:n + N] = c
        return out

    return ScalarField(shape, func, partials)


def test_no_go_n1_always_consistent():
    s = PhaseSpaceShape(1, 2, extended=False)
    rep = no_go_probe(potential(s, [0.7, -1.1]), Metric.minkowski(1), Metric.euclidean(2), np.zeros(s.dim))
    assert rep.status == "consistent" and rep.agrees


def test_no_go_zero_gradient_consistent():
    s = PhaseSpaceShape(2, 1, extended=False)
    rep = no_go_probe(potential(s, [0.0]), Metric.minkowski(2), Metric.euclidean(1), np.zeros(s.dim))
    assert rep.consistent and rep.predicted_consistent


def test_no_go_half_v_squared_explicit_rank():
    s = PhaseSpaceShape(2, 1, extended=False)
    V = ScalarField(s, lambda y: 0.5 * y[2] ** 2, lambda y: np.array([0, 0, y[2], 0, 0]))
    at = np.array([0.0, 0.0, 1.0, 0.0, 0.0])
    rep = no_go_probe(V, Metric.minkowski(2), Metric.euclidean(1), at)
    # hand-built system in b00, b01, b10, b11 with dV = 1 and g = diag(1, -1)
    A = np.array([[1, 0, 0, 0], [0, -1, 0, 0], [0, 0, 1, 0], [0, 0, 0, -1], [1, 0, 0, 1]], dtype=float)
    b = np.array([-1, 0, 0, 1, -1], dtype=float)
    A2, b2 = no_go_system([1.0], Metric.minkowski(2), Metric.euclidean(1))
    assert np.array_equal(A, A2) and np.array_equal(b, b2)
    assert np.linalg.matrix_rank(A) == 4 and np.linalg.matrix_rank(np.column_stack([A, b])) == 5
    assert rep.status == "inconsistent" and rep.residual >= 1e-3
    assert (rep.rank, rep.augmented_rank) == (4, 5)
    assert rep.agrees


def test_no_go_input_errors():
    s = PhaseSpaceShape(2, 1, extended=False)
    with pytest.raises(ValueError):
        no_go_probe(potential(s, [1.0]), Metric.minkowski(3), Metric.euclidean(1), np.zeros(s.dim))
    ext = PhaseSpaceShape(2, 1)
    with pytest.raises(ValueError):
        no_go_probe(ScalarField(ext, lambda y: 0.0), Metric.minkowski(2), Metric.euclidean(1), np.zeros(ext.dim))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.integers(1, 2), st.lists(st.floats(0.1, 3.0), min_size=2, max_size=2),
       st.lists(st.sampled_from([-1.0, 1.0]), min_size=2, max_size=2), st.booleans())
def test_no_go_matches_prediction(n, N, mags, signs, zero):
    s = PhaseSpaceShape(n, N, extended=False)
    grad = np.zeros(N) if zero else np.array(mags[:N]) * np.array(signs[:N])
    rep = no_go_probe(potential(s, grad), Metric.minkowski(n), Metric.euclidean(N), np.zeros(s.dim))
    assert rep.agrees
    if not rep.consistent:
        assert rep.residual >= 1e-3
