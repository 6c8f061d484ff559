"""Covariant Hamilton-Jacobi checks and the no-go probe on the reduced space.

Points of the configuration bundle are pairs ``(x, v)`` with ``x`` of length
n and ``v`` of length N. A map T assigns polymomenta ``T[mu, A]`` and an
energy value ``T0`` to each such point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .exterior import Metric
from .phase_space import PhaseSpaceShape, ScalarField

FD_STEP = 1e-5


class TDerivatives(NamedTuple):
    dT_dx: np.ndarray   # [mu, A, nu]
    dT_dv: np.ndarray   # [mu, A, B]
    dT0_dx: np.ndarray  # [nu]
    dT0_dv: np.ndarray  # [B]


def _fd(func, z, step):
    """Central differences of a vector-valued function; derivative index last."""
    z = np.asarray(z, dtype=float)
    cols = []
    for j in range(z.size):
        h = step * (1.0 + abs(z[j]))
        e = np.zeros_like(z)
        e[j] = h
        cols.append((np.asarray(func(z + e)) - np.asarray(func(z - e))) / (2 * h))
    return np.stack(cols, axis=-1)


@dataclass(frozen=True, eq=False)
class TMap:
    n: int
    N: int
    func: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, float]]
    derivatives_fn: Callable[[np.ndarray, np.ndarray], TDerivatives] | None = None
    fd_step: float = FD_STEP

    def __call__(self, x, v) -> tuple[np.ndarray, float]:
        T, T0 = self.func(np.asarray(x, float), np.asarray(v, float))
        return np.asarray(T, dtype=float).reshape(self.n, self.N), float(T0)

    def derivatives(self, x, v, analytic: bool = True) -> TDerivatives:
        x = np.asarray(x, float)
        v = np.asarray(v, float)
        if analytic and self.derivatives_fn is not None:
            return self.derivatives_fn(x, v)
        n = self.n

        def flat(z):
            T, T0 = self(z[:n], z[n:])
            return np.concatenate([T.ravel(), [T0]])

        J = _fd(flat, np.concatenate([x, v]), self.fd_step)
        dT = J[:-1].reshape(self.n, self.N, -1)
        return TDerivatives(dT[:, :, :n], dT[:, :, n:], J[-1, :n], J[-1, n:])


@dataclass(frozen=True, eq=False)
class SFamily:
    """n functions S^mu(x, v) with optional analytic first and second derivatives.

    ``gradient(x, v)`` returns ``(dS_dx[mu, nu], dS_dv[mu, A])`` and
    ``hessian(x, v)[mu, a, b]`` runs over the joint coordinates (x, v).
    """

    n: int
    N: int
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    gradient_fn: Callable | None = None
    hessian_fn: Callable | None = None
    fd_step: float = FD_STEP

    def __call__(self, x, v) -> np.ndarray:
        return np.asarray(self.func(np.asarray(x, float), np.asarray(v, float)), dtype=float).reshape(self.n)

    def gradient(self, x, v) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, float)
        v = np.asarray(v, float)
        if self.gradient_fn is not None:
            dx, dv = self.gradient_fn(x, v)
            return np.asarray(dx, float), np.asarray(dv, float)
        n = self.n
        J = _fd(lambda z: self(z[:n], z[n:]), np.concatenate([x, v]), self.fd_step)
        return J[:, :n], J[:, n:]

    def hessian(self, x, v) -> np.ndarray:
        x = np.asarray(x, float)
        v = np.asarray(v, float)
        if self.hessian_fn is not None:
            return np.asarray(self.hessian_fn(x, v), float)
        n = self.n

        def grad_flat(z):
            dx, dv = self.gradient(z[:n], z[n:])
            return np.concatenate([dx, dv], axis=1)

        return _fd(grad_flat, np.concatenate([x, v]), self.fd_step)

    def to_tmap(self) -> TMap:
        """T^mu_A = d_A S^mu and T0 = d_mu S^mu."""
        n, N = self.n, self.N

        def func(x, v):
            dx, dv = self.gradient(x, v)
            return dv, float(np.trace(dx))

        derivs = None
        if self.hessian_fn is not None:
            def derivs(x, v):
                Hs = self.hessian(x, v)
                mu = np.arange(n)
                return TDerivatives(
                    Hs[:, n:, :n],
                    Hs[:, n:, n:],
                    Hs[mu, mu, :n].sum(axis=0),
                    Hs[mu, mu, n:].sum(axis=0),
                )

        return TMap(n, N, func, derivs, self.fd_step)


CONDITIONS = ("momentum_gradient", "field_divergence", "energy_gradient", "compatibility")


class TConditions(NamedTuple):
    """Residuals of the four integrability conditions on T.

    momentum_gradient:  dHH/dp^mu_A (x, v, T) = 0
    field_divergence:   d_mu T^mu_A = -dHH/dv^A (x, v, T)
    energy_gradient:    d_mu T0 = -dHH/dx^mu (x, v, T)
    compatibility:      d_mu T^mu_A = d_A T0
    """

    momentum_gradient: float
    field_divergence: float
    energy_gradient: float
    compatibility: float

    def records(self, point, tol: float) -> list[dict]:
        pt = [float(c) for c in point]
        return [
            {"condition": name, "point": pt, "residual": float(r), "pass": bool(r < tol)}
            for name, r in zip(CONDITIONS, self)
        ]


def _hh_point(HH: ScalarField, x, v, T) -> np.ndarray:
    y = np.concatenate([np.asarray(x, float), np.asarray(v, float), np.asarray(T, float).ravel()])
    if y.size != HH.shape.dim:
        raise ValueError("point does not match the Hamiltonian's phase space")
    return y


def check_T_conditions(T: TMap, HH: ScalarField, x, v, analytic: bool = True) -> TConditions:
    """Evaluate the four conditions with HH-partials taken at (x, v, T(x, v))."""
    n, N = T.n, T.N
    Tv, _ = T(x, v)
    grad = HH.gradient(_hh_point(HH, x, v, Tv))
    dHH_x, dHH_v, dHH_p = grad[:n], grad[n:n + N], grad[n + N:]
    d = T.derivatives(x, v, analytic)
    div = np.einsum("mAm->A", d.dT_dx)
    return TConditions(
        float(np.abs(dHH_p).max()),
        float(np.abs(div + dHH_v).max()),
        float(np.abs(d.dT0_dx + dHH_x).max()),
        float(np.abs(div - d.dT0_dv).max()),
    )


def hj_residual(S: SFamily, HH: ScalarField, x, v) -> float:
    """|d_mu S^mu + HH(x, v, d_v S)|."""
    dx, dv = S.gradient(x, v)
    return abs(float(np.trace(dx)) + HH(_hh_point(HH, x, v, dv)))


def exactness_residuals(S: SFamily, HH: ScalarField, x, v) -> tuple[float, float]:
    """Pointwise checks that dT = 0 and d(H o T) = 0 for T induced by S.

    The first value is the largest antisymmetric part of the second
    derivatives of S; the second is the largest component of the gradient of
    -HH(x, v, T) - T0 over (x, v), by central differences.
    """
    Hs = S.hessian(x, v)
    asym = float(np.abs(Hs - Hs.transpose(0, 2, 1)).max())
    T = S.to_tmap()
    n = S.n

    def h_of_t(z):
        Tv, T0 = T(z[:n], z[n:])
        return np.array([-HH(_hh_point(HH, z[:n], z[n:], Tv)) - T0])

    z = np.concatenate([np.asarray(x, float), np.asarray(v, float)])
    grad = _fd(h_of_t, z, S.fd_step)
    return asym, float(np.abs(grad).max())


def kg_S(field, params, x, v) -> np.ndarray:
    """S^mu(x, v) = (v - Phi(x)/2) g^{mu nu} d_nu Phi(x) for a Klein-Gordon solution Phi."""
    v = float(np.asarray(v, dtype=float).ravel()[0])
    return (v - 0.5 * field.value(x)) * params.g_inv * field.grad(x)


def kg_S_family(field, params) -> SFamily:
    """The family S^mu of ``kg_S`` with analytic derivatives from the field."""
    n, gi = params.n, params.g_inv

    def func(x, v):
        return kg_S(field, params, x, v)

    def gradient(x, v):
        phi, d1, d2 = field.value(x), field.grad(x), field.hessian(x)
        G = gi * d1
        dG = gi[:, None] * d2                      # [mu, nu]
        dx = -0.5 * np.outer(G, d1) + (v[0] - 0.5 * phi) * dG
        return dx, G[:, None]

    def hessian(x, v):
        phi, d1, d2, d3 = field.value(x), field.grad(x), field.hessian(x), field.third(x)
        G = gi * d1
        dG = gi[:, None] * d2
        ddG = gi[:, None, None] * d3
        Hs = np.zeros((n, n + 1, n + 1))
        Hs[:, :n, :n] = (
            -0.5 * np.einsum("m,ln->mln", G, d2)
            - 0.5 * np.einsum("n,ml->mln", d1, dG)
            - 0.5 * np.einsum("l,mn->mln", d1, dG)
            + (v[0] - 0.5 * phi) * ddG
        )
        Hs[:, n, :n] = dG
        Hs[:, :n, n] = dG
        return Hs

    return SFamily(n, 1, func, gradient, hessian)


def kg_adapted(field, params) -> tuple[ScalarField, SFamily]:
    """Klein-Gordon data in the fibre chart w = v - Phi(x) comoving with a solution.

    In this chart the leaf through the solution is w = 0 and the DW
    Hamiltonian becomes
    HH'(x, w, p) = HH(x, w + Phi(x), p) - p^mu d_mu Phi(x),
    while the S^mu transform as scalars: S'(x, w) = S(x, w + Phi(x)).
    """
    n, g, gi, m2 = params.n, params.g, params.g_inv, params.mass ** 2
    shape = PhaseSpaceShape(n, 1, extended=False)

    def hh(y):
        x, w, p = y[:n], y[n], y[n + 1:]
        u = w + field.value(x)
        return 0.5 * float(g @ (p * p)) + 0.5 * m2 * u * u - float(p @ field.grad(x))

    def hh_partials(y):
        x, w, p = y[:n], y[n], y[n + 1:]
        u = w + field.value(x)
        d1, d2 = field.grad(x), field.hessian(x)
        return np.concatenate([m2 * u * d1 - d2 @ p, [m2 * u], g * p - d1])

    def func(x, w):
        return (w[0] + 0.5 * field.value(x)) * gi * field.grad(x)

    def gradient(x, w):
        phi, d1, d2 = field.value(x), field.grad(x), field.hessian(x)
        G = gi * d1
        dG = gi[:, None] * d2
        dx = (w[0] + 0.5 * phi) * dG + 0.5 * np.outer(G, d1)
        return dx, G[:, None]

    def hessian(x, w):
        phi, d1, d2, d3 = field.value(x), field.grad(x), field.hessian(x), field.third(x)
        G = gi * d1
        dG = gi[:, None] * d2
        ddG = gi[:, None, None] * d3
        Hs = np.zeros((n, n + 1, n + 1))
        Hs[:, :n, :n] = (
            0.5 * np.einsum("m,ln->mln", G, d2)
            + 0.5 * np.einsum("n,ml->mln", d1, dG)
            + 0.5 * np.einsum("l,mn->mln", d1, dG)
            + (w[0] + 0.5 * phi) * ddG
        )
        Hs[:, n, :n] = dG
        Hs[:, :n, n] = dG
        return Hs

    return ScalarField(shape, hh, hh_partials), SFamily(n, 1, func, gradient, hessian)


@dataclass(frozen=True)
class ConsistencyReport:
    status: str            # "consistent", "inconsistent" or "indeterminate"
    residual: float
    predicted_consistent: bool
    rank: int
    augmented_rank: int

    @property
    def consistent(self) -> bool:
        return self.status == "consistent"

    @property
    def agrees(self) -> bool:
        return self.status != "indeterminate" and self.consistent == self.predicted_consistent


def no_go_system(grad_v: np.ndarray, g: Metric, eta: Metric) -> tuple[np.ndarray, np.ndarray]:
    """Linear system for the momentum components b[mu, nu, A] of a decomposition on the reduced space.

    For HH = 1/2 g_{mu nu} eta^{AB} p^mu_A p^nu_B + V(x, v) the vanishing of the
    two-vertical components, read coefficient-wise in the independent
    polymomenta p^rho_B, gives for every (mu, rho, B)

        sum_{nu, A} g_{nu rho} eta^{AB} b[mu, nu, A] = -g_{mu rho} eta^{AB} d_A V,

    and the one-vertical components require sum_mu b[mu, mu, A] = -d_A V.
    """
    n, N = g.dim, eta.dim
    gd, eta_inv = g.diag, eta.inverse_diag
    grad_v = np.asarray(grad_v, dtype=float).reshape(N)

    def col(mu, nu, A):
        return (mu * n + nu) * N + A

    rows, rhs = [], []
    for mu in range(n):
        for rho in range(n):
            for B in range(N):
                row = np.zeros(n * n * N)
                # diagonal metrics: only nu = rho and A = B survive
                row[col(mu, rho, B)] = gd[rho] * eta_inv[B]
                rows.append(row)
                rhs.append(-(gd[mu] if mu == rho else 0.0) * eta_inv[B] * grad_v[B])
    for A in range(N):
        row = np.zeros(n * n * N)
        for mu in range(n):
            row[col(mu, mu, A)] = 1.0
        rows.append(row)
        rhs.append(-grad_v[A])
    return np.array(rows), np.array(rhs)


def no_go_probe(
    V: ScalarField,
    g: Metric,
    eta: Metric,
    at,
    *,
    consistent_tol: float = 1e-10,
    threshold: float = 1e-3,
) -> ConsistencyReport:
    """Test whether a quadratic DW Hamiltonian admits a decomposable Hamiltonian
    n-vector on the reduced space at a point.

    ``V`` is the potential, a function on the reduced space that ignores the
    polymomenta. The prediction is consistency iff n = 1 or dV/dv vanishes.
    """
    shape = V.shape
    if shape.extended:
        raise ValueError("the probe works on the reduced phase space")
    n, N = shape.n, shape.N
    if g.dim != n or eta.dim != N:
        raise ValueError("metric dimensions do not match the phase space")
    grad_v = V.gradient(at)[shape.v_slice]
    A, b = no_go_system(grad_v, g, eta)
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    residual = float(np.linalg.norm(A @ sol - b))
    rank = int(np.linalg.matrix_rank(A))
    aug = int(np.linalg.matrix_rank(np.column_stack([A, b])))
    if residual < consistent_tol:
        status = "consistent"
    elif residual >= threshold:
        status = "inconsistent"
    else:
        status = "indeterminate"
    predicted = n == 1 or bool(np.all(grad_v == 0.0))
    return ConsistencyReport(status, residual, predicted, rank, aug)
