"""De Donder-Weyl dynamics of the free Klein-Gordon field.

The grid integrator evolves the first-order system in 1+1 dimensions:

    d_t phi = g_tt pi^t,     d_t pi^t = -m^2 phi - d_x pi^x,     pi^x = g^xx d_x phi

with a velocity-Verlet (kick-drift-kick leapfrog) step and a periodic
compact Laplacian in space.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.polynomial import polynomial as P

from .exterior import Metric, Multivector, VectorField, wedge_vectors
from .hamvec import ResidualReport, verify_hamvec
from .phase_space import PhasePoint, PhaseSpaceShape, ScalarField, dw_function


class StencilError(ValueError):
    """The requested node lacks the neighbours a central difference needs."""


class CFLError(ValueError):
    pass


@dataclass(frozen=True)
class KGParams:
    n: int = 2
    mass: float = 1.0
    metric: Metric | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("space-time dimension must be positive")
        if self.mass < 0:
            raise ValueError("mass must be non-negative")
        metric = self.metric or Metric.minkowski(self.n)
        if metric.dim != self.n:
            raise ValueError("metric dimension does not match n")
        object.__setattr__(self, "metric", metric)

    @property
    def g(self) -> np.ndarray:
        return self.metric.diag

    @property
    def g_inv(self) -> np.ndarray:
        return self.metric.inverse_diag

    @property
    def shape(self) -> PhaseSpaceShape:
        return PhaseSpaceShape(self.n, 1, extended=True)


def kg_hamiltonian(params: KGParams) -> ScalarField:
    """HH(x, v, p) = 1/2 g_{mu nu} p^mu p^nu + 1/2 m^2 v^2 on the reduced space."""
    n, g, m2 = params.n, params.g, params.mass ** 2
    shape = PhaseSpaceShape(n, 1, extended=False)

    def func(y):
        v, p = y[n], y[n + 1:]
        return 0.5 * float(g @ (p * p)) + 0.5 * m2 * v * v

    def partials(y):
        v, p = y[n], y[n + 1:]
        return np.concatenate([np.zeros(n), [m2 * v], g * p])

    return ScalarField(shape, func, partials)


def kg_dw_function(params: KGParams) -> ScalarField:
    return dw_function(kg_hamiltonian(params))


@dataclass(frozen=True, eq=False)
class JetPoint:
    x: np.ndarray
    v: np.ndarray
    v_mu: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        v = np.asarray(self.v, dtype=float).ravel()
        v_mu = np.asarray(self.v_mu, dtype=float).reshape(x.size, v.size)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "v_mu", v_mu)


def legendre(params: KGParams, jet: JetPoint) -> PhasePoint:
    """Covariant Legendre map of the Klein-Gordon Lagrangian."""
    if jet.x.size != params.n or jet.v.size != 1:
        raise ValueError("jet point does not match the Klein-Gordon parameters")
    v = jet.v[0]
    vel = jet.v_mu[:, 0]
    p = params.g_inv * vel
    lagrangian = 0.5 * float(params.g_inv @ (vel * vel)) - 0.5 * params.mass ** 2 * v * v
    e = -(float(vel @ p) - lagrangian)
    return PhasePoint(params.shape, jet.x, [v], p.reshape(params.n, 1), e)


@dataclass(frozen=True)
class PlaneWave:
    """phi(x) = amplitude * cos(k_mu x^mu + phase) with g^{mu nu} k_mu k_nu = m^2.

    ``wavevector`` holds the spatial components; the time component is
    -omega with omega > 0, so the wave travels along +wavevector.
    """

    wavevector: tuple[float, ...]
    params: KGParams
    amplitude: float = 1.0
    phase: float = 0.0

    @property
    def k(self) -> np.ndarray:
        ks = np.asarray(self.wavevector, dtype=float)
        gi = self.params.g_inv
        omega2 = (self.params.mass ** 2 - float(gi[1:] @ (ks * ks))) / gi[0]
        if omega2 < 0:
            raise ValueError("wavevector has no real frequency for this mass and metric")
        return np.concatenate([[-math.sqrt(omega2)], ks])

    @property
    def omega(self) -> float:
        return -float(self.k[0])

    def _theta(self, x) -> float:
        return float(self.k @ np.asarray(x, dtype=float)) + self.phase

    def value(self, x) -> float:
        return self.amplitude * math.cos(self._theta(x))

    def grad(self, x) -> np.ndarray:
        return -self.amplitude * math.sin(self._theta(x)) * self.k

    def hessian(self, x) -> np.ndarray:
        k = self.k
        return -self.amplitude * math.cos(self._theta(x)) * np.outer(k, k)

    def third(self, x) -> np.ndarray:
        k = self.k
        return self.amplitude * math.sin(self._theta(x)) * np.einsum("i,j,k->ijk", k, k, k)

    def polymomenta(self, x) -> np.ndarray:
        return self.params.g_inv * self.grad(x)


@dataclass(frozen=True)
class GridSpec:
    extent: float
    nx: int
    dt: float
    steps: int

    @property
    def dx(self) -> float:
        return self.extent / self.nx


@dataclass(frozen=True, eq=False)
class FieldSolution:
    """Field, polymomenta and DW energy on a uniform (t, x) lattice.

    ``pi[i, j]`` holds (pi^t, pi^x) at time level i and site j.
    """

    params: KGParams
    t: np.ndarray
    x: np.ndarray
    phi: np.ndarray
    pi: np.ndarray
    energy: np.ndarray
    periodic: bool = True

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def nt(self) -> int:
        return self.t.size

    @property
    def nx(self) -> int:
        return self.x.size

    @classmethod
    def from_fields(cls, params: KGParams, t, x, phi, pi, periodic: bool = False) -> "FieldSolution":
        """Wrap given lattice data; the energy is set to -HH(phi, pi)."""
        phi = np.asarray(phi, dtype=float)
        pi = np.asarray(pi, dtype=float)
        return cls(params, np.asarray(t, float), np.asarray(x, float), phi, pi, _dw_energy(params, phi, pi), periodic)


def _dw_energy(params: KGParams, phi, pi) -> np.ndarray:
    return -(0.5 * np.einsum("...m,m->...", pi * pi, params.g) + 0.5 * params.mass ** 2 * phi * phi)


def _ddx(f, dx):
    return (np.roll(f, -1, axis=-1) - np.roll(f, 1, axis=-1)) / (2 * dx)


def _laplace(f, dx):
    return (np.roll(f, -1, axis=-1) - 2 * f + np.roll(f, 1, axis=-1)) / (dx * dx)


def integrate_kg(params: KGParams, phi0, pi0, grid: GridSpec) -> FieldSolution:
    """Evolve periodic 1+1 Klein-Gordon initial data.

    ``phi0`` and ``pi0`` are the field and pi^t on the t = 0 slice.
    """
    if params.n != 2:
        raise ValueError("the grid integrator supports n = 2 only")
    phi = np.array(phi0, dtype=float)
    pit = np.array(pi0, dtype=float)
    if phi.shape != (grid.nx,) or pit.shape != (grid.nx,):
        raise ValueError(f"initial data must have length nx = {grid.nx}")
    dx, dt = grid.dx, grid.dt
    if dt > dx:
        raise CFLError(f"dt = {dt:.4g} exceeds dx = {dx:.4g}")
    g_tt, g_xx = params.g
    ginv_xx = params.g_inv[1]
    m2 = params.mass ** 2

    def force(f):
        # d_t pi^t = -m^2 phi - d_x pi^x
        return -m2 * f - ginv_xx * _laplace(f, dx)

    phis = np.empty((grid.steps + 1, grid.nx))
    pits = np.empty_like(phis)
    phis[0], pits[0] = phi, pit
    for i in range(grid.steps):
        half = pit + 0.5 * dt * force(phi)
        phi = phi + dt * g_tt * half
        pit = half + 0.5 * dt * force(phi)
        phis[i + 1], pits[i + 1] = phi, pit
    pix = ginv_xx * _ddx(phis, dx)
    pi = np.stack([pits, pix], axis=-1)
    t = dt * np.arange(grid.steps + 1)
    x = dx * np.arange(grid.nx)
    return FieldSolution(params, t, x, phis, pi, _dw_energy(params, phis, pi), periodic=True)


def plane_wave_run(params: KGParams, extent: float, nx: int, cfl: float, t_final: float, modes: int = 1):
    """Integrate the plane wave with k = 2 pi modes / extent; returns (solution, exact wave).

    The step is exactly ``cfl * dx`` so refinement studies keep dt / dx fixed;
    the run stops at the multiple of dt nearest to ``t_final``.
    """
    wave = PlaneWave((2 * math.pi * modes / extent,), params)
    dx = extent / nx
    dt = cfl * dx
    steps = max(1, int(round(t_final / dt)))
    x = dx * np.arange(nx)
    phi0 = np.array([wave.value((0.0, xi)) for xi in x])
    pi0 = np.array([wave.polymomenta((0.0, xi))[0] for xi in x])
    return integrate_kg(params, phi0, pi0, GridSpec(extent, nx, dt, steps)), wave


def _neighbour(sol: FieldSolution, ix: int, off: int) -> int:
    j = ix + off
    if sol.periodic:
        return j % sol.nx
    if not 0 <= j < sol.nx:
        raise StencilError(f"site {ix} has no neighbour at offset {off}")
    return j


def _check_node(sol: FieldSolution, node, reach: int = 1):
    it, ix = node
    if not reach <= it < sol.nt - reach:
        raise StencilError(f"time level {it} lacks a central stencil of reach {reach}")
    if not sol.periodic and not reach <= ix < sol.nx - reach:
        raise StencilError(f"site {ix} lacks a central stencil of reach {reach}")


def section_point(sol: FieldSolution, node) -> PhasePoint:
    """gamma(node) = (t, x, phi, pi, e) on the extended phase space."""
    it, ix = node
    return PhasePoint(
        sol.params.shape,
        [sol.t[it], sol.x[ix]],
        [sol.phi[it, ix]],
        sol.pi[it, ix].reshape(2, 1),
        sol.energy[it, ix],
    )


def grid_derivatives(sol: FieldSolution, node) -> tuple[np.ndarray, np.ndarray]:
    """Central differences (d_mu phi, d_mu pi^nu) at a node; second array is [mu, nu]."""
    _check_node(sol, node)
    it, ix = node
    lo, hi = _neighbour(sol, ix, -1), _neighbour(sol, ix, 1)
    dphi = np.array([
        (sol.phi[it + 1, ix] - sol.phi[it - 1, ix]) / (2 * sol.dt),
        (sol.phi[it, hi] - sol.phi[it, lo]) / (2 * sol.dx),
    ])
    dpi = np.stack([
        (sol.pi[it + 1, ix] - sol.pi[it - 1, ix]) / (2 * sol.dt),
        (sol.pi[it, hi] - sol.pi[it, lo]) / (2 * sol.dx),
    ])
    return dphi, dpi


def _lift_vectors(sol: FieldSolution, node, HH: ScalarField) -> np.ndarray:
    shape = sol.params.shape
    n = shape.n
    pt = section_point(sol, node)
    dphi, dpi = grid_derivatives(sol, node)
    grad = HH.gradient(pt.project())
    dHH_x, dHH_v, dHH_p = grad[:n], grad[n], grad[n + 1:]
    Z = np.zeros((n, shape.dim))
    Z[:, shape.x_slice] = np.eye(n)
    Z[:, shape.v_index(0)] = dphi
    for nu in range(n):
        Z[:, shape.p_index(nu, 0)] = dpi[:, nu]
    Z[:, shape.e_index] = -(dHH_x + dHH_v * dphi + dpi @ dHH_p)
    return Z


def lift(sol: FieldSolution, node, HH: ScalarField | None = None) -> list[Multivector]:
    """Tangent lifts Z_mu of the coordinate fields through the section at a node."""
    HH = HH or kg_hamiltonian(sol.params)
    basis = sol.params.shape.basis()
    return [Multivector.vector(basis, row) for row in _lift_vectors(sol, node, HH)]


def _lagrange3(s: float) -> tuple[np.ndarray, np.ndarray]:
    """Quadratic Lagrange weights on nodes -1, 0, 1 and their derivatives."""
    w = np.array([0.5 * s * (s - 1), 1 - s * s, 0.5 * s * (s + 1)])
    dw = np.array([s - 0.5, -2 * s, s + 0.5])
    return w, dw


def lift_fields(sol: FieldSolution, node, HH: ScalarField | None = None) -> list[VectorField]:
    """Extend the nodal lifts around a node to vector fields on phase space.

    The fields are constant along the fibres and interpolate the lifts of
    the surrounding 3 x 3 nodes quadratically in (t, x).
    """
    HH = HH or kg_hamiltonian(sol.params)
    _check_node(sol, node, reach=2)
    it, ix = node
    shape = sol.params.shape
    nodal = np.empty((3, 3, shape.n, shape.dim))
    for a in range(3):
        for b in range(3):
            nodal[a, b] = _lift_vectors(sol, (it + a - 1, _neighbour(sol, ix, b - 1)), HH)
    t0, x0, dt, dx = sol.t[it], sol.x[ix], sol.dt, sol.dx

    def make(mu):
        def func(y):
            wt, _ = _lagrange3((y[0] - t0) / dt)
            wx, _ = _lagrange3((y[1] - x0) / dx)
            return np.einsum("a,b,abd->d", wt, wx, nodal[:, :, mu])

        def jac(y):
            wt, dwt = _lagrange3((y[0] - t0) / dt)
            wx, dwx = _lagrange3((y[1] - x0) / dx)
            J = np.zeros((shape.dim, shape.dim))
            J[:, 0] = np.einsum("a,b,abd->d", dwt / dt, wx, nodal[:, :, mu])
            J[:, 1] = np.einsum("a,b,abd->d", wt, dwx / dx, nodal[:, :, mu])
            return J

        return VectorField(func, jac)

    return [make(mu) for mu in range(shape.n)]


@dataclass(frozen=True, eq=False)
class Prop2Report:
    residual: ResidualReport
    h_value: float


def verify_prop2(sol: FieldSolution, node, H: ScalarField | None = None) -> Prop2Report:
    """Check that (-Z_1) ^ ... ^ (-Z_n) from the lifts is Hamiltonian for H."""
    HH = kg_hamiltonian(sol.params)
    H = H or dw_function(HH)
    pt = section_point(sol, node)
    Z = _lift_vectors(sol, node, HH)
    X = wedge_vectors(sol.params.shape.basis(), -Z)
    return Prop2Report(verify_hamvec(X, H, pt), abs(H(pt)))


def dw_defects(sol: FieldSolution, node) -> tuple[float, float]:
    """Discrete defects of the two DW equations at a node.

    Returns max |d_mu phi - g_{mu nu} pi^nu| and |d_mu pi^mu + m^2 phi|.
    """
    it, ix = node
    dphi, dpi = grid_derivatives(sol, node)
    field = float(np.abs(dphi - sol.params.g * sol.pi[it, ix]).max())
    flux = abs(float(np.trace(dpi)) + sol.params.mass ** 2 * sol.phi[it, ix])
    return field, flux


class GridPatch:
    """Tensor-product polynomial interpolant of the lattice field around a node.

    Exposes value and derivatives up to third order in (t, x), matching the
    interface of ``PlaneWave``.
    """

    def __init__(self, sol: FieldSolution, node, width: int = 5):
        if width % 2 == 0 or width < 3:
            raise ValueError("width must be odd and at least 3")
        r = width // 2
        _check_node(sol, node, reach=r)
        it, ix = node
        rows = [it + a for a in range(-r, r + 1)]
        cols = [_neighbour(sol, ix, b) for b in range(-r, r + 1)]
        vals = sol.phi[np.ix_(rows, cols)]
        s = np.arange(-r, r + 1, dtype=float)
        inv = np.linalg.inv(np.vander(s, increasing=True))
        self.coef = inv @ vals @ inv.T
        self.origin = np.array([sol.t[it], sol.x[ix]])
        self.steps = np.array([sol.dt, sol.dx])

    def _eval(self, x, orders) -> float:
        s = (np.asarray(x, dtype=float) - self.origin) / self.steps
        c = self.coef
        if orders[0]:
            c = P.polyder(c, orders[0], axis=0)
        if orders[1]:
            c = P.polyder(c, orders[1], axis=1)
        scale = self.steps[0] ** orders[0] * self.steps[1] ** orders[1]
        return float(P.polyval2d(s[0], s[1], c)) / scale

    def value(self, x) -> float:
        return self._eval(x, (0, 0))

    def grad(self, x) -> np.ndarray:
        return np.array([self._eval(x, (1, 0)), self._eval(x, (0, 1))])

    def hessian(self, x) -> np.ndarray:
        H = np.empty((2, 2))
        for i in range(2):
            for j in range(2):
                orders = [0, 0]
                orders[i] += 1
                orders[j] += 1
                H[i, j] = self._eval(x, orders)
        return H

    def third(self, x) -> np.ndarray:
        T = np.empty((2, 2, 2))
        for i in range(2):
            for j in range(2):
                for k in range(2):
                    orders = [0, 0]
                    for a in (i, j, k):
                        orders[a] += 1
                    T[i, j, k] = self._eval(x, orders)
        return T


def write_csv(sol: FieldSolution, path) -> Path:
    """Write columns t, x, phi, pi_t, pi_x, energy, one row per node."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "phi", "pi_t", "pi_x", "energy"])
        for i in range(sol.nt):
            for j in range(sol.nx):
                w.writerow([
                    repr(float(sol.t[i])), repr(float(sol.x[j])), repr(float(sol.phi[i, j])),
                    repr(float(sol.pi[i, j, 0])), repr(float(sol.pi[i, j, 1])), repr(float(sol.energy[i, j])),
                ])
    return path
