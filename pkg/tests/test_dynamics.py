import csv
import math

import numpy as np
import pytest

from polysymp.dynamics import (
    CFLError,
    FieldSolution,
    GridPatch,
    GridSpec,
    JetPoint,
    KGParams,
    PlaneWave,
    StencilError,
    dw_defects,
    grid_derivatives,
    integrate_kg,
    kg_dw_function,
    legendre,
    lift,
    lift_fields,
    plane_wave_run,
    section_point,
    verify_prop2,
    write_csv,
)
from polysymp.exterior import Metric, involutivity_check, is_decomposable, wedge_vectors

L = 2 * math.pi
P = KGParams(2, 1.0)


def test_plane_wave_satisfies_kg():
    for p, ks in [(P, (1.0,)), (KGParams(4, 0.7), (0.3, -0.1, 0.4))]:
        w = PlaneWave(ks, p)
        x = np.linspace(0.1, 0.9, p.n)
        box = float(p.g_inv @ np.diag(w.hessian(x)))
        assert box + p.mass ** 2 * w.value(x) == pytest.approx(0.0, abs=1e-12)
        assert w.omega > 0


def test_plane_wave_tachyonic_rejected():
    with pytest.raises(ValueError):
        PlaneWave((2.0,), KGParams(2, 1.0, metric=Metric.euclidean(2))).k
    w = PlaneWave((2.0,), KGParams(2, 1.0))
    assert w.omega == pytest.approx(math.sqrt(5.0))


def test_zero_solution():
    nx, steps = 16, 10
    sol = integrate_kg(P, np.zeros(nx), np.zeros(nx), GridSpec(L, nx, 0.1, steps))
    assert not sol.phi.any() and not sol.energy.any()
    for ix in range(nx):
        rep = verify_prop2(sol, (5, ix))
        assert rep.residual.max_abs == 0.0 and rep.h_value == 0.0


def test_cfl_and_stencil_errors():
    with pytest.raises(CFLError):
        integrate_kg(P, np.zeros(8), np.zeros(8), GridSpec(L, 8, 1.0, 2))
    with pytest.raises(ValueError):
        integrate_kg(KGParams(4), np.zeros(8), np.zeros(8), GridSpec(L, 8, 0.1, 2))
    sol, _ = plane_wave_run(P, L, 16, 0.5, 0.5)
    with pytest.raises(StencilError):
        grid_derivatives(sol, (0, 3))
    with pytest.raises(StencilError):
        lift_fields(sol, (1, 3))
    t = np.arange(5) * 0.1
    x = np.arange(6) * 0.2
    open_sol = FieldSolution.from_fields(P, t, x, np.zeros((5, 6)), np.zeros((5, 6, 2)))
    with pytest.raises(StencilError):
        lift(open_sol, (2, 0))
    lift(open_sol, (2, 1))


def test_integrator_second_order_and_energy_consistency():
    errs = []
    for nx in (32, 64, 128):
        sol, w = plane_wave_run(P, L, nx, 0.5, 1.0)
        exact = np.array([[w.value((t, x)) for x in sol.x] for t in sol.t])
        errs.append(np.abs(exact - sol.phi).max())
        # energy column recomputed independently
        e = -(0.5 * (sol.pi[..., 0] ** 2 - sol.pi[..., 1] ** 2) + 0.5 * sol.phi ** 2)
        assert np.abs(e - sol.energy).max() < 1e-14
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert orders.min() > 1.9


def test_flux_defect_second_order():
    flux = []
    for nx in (64, 128, 256):
        sol, _ = plane_wave_run(P, L, nx, 0.5, 1.0)
        it = sol.nt // 2
        flux.append(max(dw_defects(sol, (it, ix))[1] for ix in range(nx)))
    orders = np.log2(np.array(flux[:-1]) / np.array(flux[1:]))
    assert orders.min() > 1.9


def test_non_solution_residual_stays_away_from_zero():
    # phi = x t with pi = 0: the field equation d_mu phi = g pi fails by (x, t)
    res = []
    for n in (16, 32, 64):
        t = np.linspace(0.5, 1.5, n + 1)
        x = np.linspace(0.5, 1.5, n + 1)
        phi = np.outer(t, x)
        pi = np.zeros(phi.shape + (2,))
        sol = FieldSolution.from_fields(P, t, x, phi, pi)
        res.append(verify_prop2(sol, (n // 2, n // 2)).residual.max_abs)
    assert min(res) > 0.5
    assert abs(res[-1] - res[0]) < 1e-8


def test_lifts_are_independent_and_involutive_at_zero_order():
    sol, _ = plane_wave_run(P, L, 32, 0.5, 1.0)
    it = sol.nt // 2
    for ix in range(0, 32, 5):
        Z = lift(sol, (it, ix))
        rep = is_decomposable(wedge_vectors(sol.params.shape.basis(), Z))
        assert rep.annihilator_dim == 2
        res = involutivity_check(lift_fields(sol, (it, ix)), section_point(sol, (it, ix)), tol=1e-2)
        assert res.involutive


def test_legendre_lands_on_zero_level():
    rng = np.random.default_rng(4)
    H = kg_dw_function(P)
    for _ in range(5):
        jet = JetPoint(rng.normal(size=2), rng.normal(size=1), rng.normal(size=(2, 1)))
        pt = legendre(P, jet)
        assert abs(H(pt)) < 1e-14
        assert np.allclose(pt.p[:, 0], P.g_inv * jet.v_mu[:, 0])


def test_grid_patch_recovers_plane_wave():
    sol, w = plane_wave_run(P, L, 128, 0.5, 1.0)
    node = (sol.nt // 2, 17)
    patch = GridPatch(sol, node)
    x = (sol.t[node[0]], sol.x[node[1]])
    assert patch.value(x) == pytest.approx(sol.phi[node], abs=1e-14)
    assert np.abs(patch.grad(x) - w.grad(x)).max() < 1e-3
    assert np.abs(patch.hessian(x) - w.hessian(x)).max() < 1e-2
    with pytest.raises(ValueError):
        GridPatch(sol, node, width=4)


def test_csv_columns(tmp_path):
    sol, _ = plane_wave_run(P, L, 8, 0.5, 0.2)
    path = write_csv(sol, tmp_path / "run.csv")
    with path.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "x", "phi", "pi_t", "pi_x", "energy"]
    assert len(rows) == 1 + sol.nt * sol.nx
    assert float(rows[1][2]) == sol.phi[0, 0]
