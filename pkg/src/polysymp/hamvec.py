"""Decomposable Hamiltonian n-vector fields for H = -HH - e."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exterior import GradeError, Multivector, contract, wedge_vectors
from .phase_space import PhasePoint, PhaseSpaceError, PhaseSpaceShape, ScalarField, build_omega, d_scalar

HYPOTHESIS_TOL = 1e-9
GAUGE_TOL = 1e-12


class HypothesisError(ValueError):
    """The Hamiltonian does not have unit negative slope along the energy direction."""


class GaugeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Decomposition:
    """n vectors Z_mu whose wedge is a Hamiltonian n-vector.

    Component arrays: ``horizontal[mu, nu]``, ``field[mu, A]``,
    ``momentum[mu, nu, A]`` and ``energy[mu]``.
    """

    point: PhasePoint
    horizontal: np.ndarray
    field: np.ndarray
    momentum: np.ndarray
    energy: np.ndarray
    gauge: np.ndarray

    @property
    def factors(self) -> tuple[Multivector, ...]:
        basis = self.point.shape.basis()
        return tuple(Multivector.vector(basis, row) for row in self.vectors())

    def vectors(self) -> np.ndarray:
        s = self.point.shape
        out = np.zeros((s.n, s.dim))
        out[:, s.x_slice] = self.horizontal
        out[:, s.v_slice] = self.field
        out[:, s.p_slice] = self.momentum.reshape(s.n, s.n * s.N)
        out[:, s.e_index] = self.energy
        return out

    def multivector(self) -> Multivector:
        return wedge_vectors(self.point.shape.basis(), self.vectors())


def _check_gauge(shape: PhaseSpaceShape, gauge, trace_only: bool) -> np.ndarray:
    n, N = shape.n, shape.N
    if gauge is None:
        return np.zeros((n, n, N))
    gauge = np.asarray(gauge, dtype=float)
    if gauge.shape != (n, n, N):
        raise GaugeError(f"gauge must have shape {(n, n, N)}, got {gauge.shape}")
    diag = np.einsum("mmA->mA", gauge)
    scale = max(1.0, float(np.abs(gauge).max()))
    if trace_only:
        bad = np.abs(diag.sum(axis=0)).max() > GAUGE_TOL * scale
    else:
        bad = np.abs(diag).max() > GAUGE_TOL * scale
    if bad:
        raise GaugeError("gauge violates the diagonal constraint")
    return gauge


def construct_decomposition(
    H: ScalarField,
    at: PhasePoint,
    gauge=None,
    *,
    trace_only: bool = False,
) -> Decomposition:
    """Build Z_1..Z_n with (Z_1 ^ ... ^ Z_n) _| Omega = dH at a point.

    Parameters
    ----------
    H : ScalarField
        Function on the extended space with dH/de = -1.
    at : PhasePoint
    gauge : array (n, n, N), optional
        Free momentum components (Z'_mu)^nu_A added to the canonical choice.
        By default each diagonal entry (Z'_mu)^mu_A must vanish; with
        ``trace_only`` only their sum over mu must.

    Returns
    -------
    Decomposition
    """
    shape = H.shape
    if not shape.extended:
        raise PhaseSpaceError("construction needs the extended phase space")
    n, N = shape.n, shape.N
    grad = H.gradient(at)
    xi = grad[shape.e_index]
    if abs(xi + 1.0) > HYPOTHESIS_TOL:
        raise HypothesisError(f"dH/de = {xi:.6g}, expected -1")
    gauge = _check_gauge(shape, gauge, trace_only)

    dH_x = grad[shape.x_slice]
    dH_v = grad[shape.v_slice]
    dH_p = grad[shape.p_slice].reshape(n, N)

    horizontal = -np.eye(n)
    field = dH_p.copy()
    momentum = -np.einsum("mn,A->mnA", np.eye(n), dH_v) / n + gauge
    trace = np.einsum("nnA->A", momentum)
    cross = field @ trace - np.einsum("nA,mnA->m", field, momentum)
    energy = -dH_x - cross
    return Decomposition(at, horizontal, field, momentum, energy, gauge)


FAMILIES = ("v", "p", "x", "e")


@dataclass(frozen=True, eq=False)
class ResidualReport:
    """Componentwise mismatch of X _| Omega against dH.

    ``per_family`` groups components by the coordinate block of the free
    form index: ``v`` (dH/dv), ``p`` (dH/dp), ``x`` (dH/dx), ``e`` (dH/de).
    """

    max_abs: float
    per_family: dict
    components: np.ndarray

    def to_dict(self) -> dict:
        return {"max_abs": self.max_abs, "per_family": dict(self.per_family)}


def residual_report(shape: PhaseSpaceShape, components: np.ndarray) -> ResidualReport:
    comps = np.asarray(components, dtype=float)
    slices = {"x": shape.x_slice, "v": shape.v_slice, "p": shape.p_slice}
    if shape.extended:
        slices["e"] = slice(shape.e_index, shape.e_index + 1)
    fam = {}
    for name in FAMILIES:
        if name in slices:
            block = np.abs(comps[slices[name]])
            fam[name] = float(block.max()) if block.size else 0.0
    return ResidualReport(float(np.abs(comps).max()), fam, comps)


def verify_hamvec(X: Multivector, H: ScalarField, at: PhasePoint) -> ResidualReport:
    """Residual of X _| Omega = dH at a point."""
    shape = H.shape
    if not shape.extended:
        raise PhaseSpaceError("verification needs the extended phase space")
    if X.grade != shape.n:
        raise GradeError(f"expected an {shape.n}-vector, got grade {X.grade}")
    lhs = contract(X, build_omega(shape))
    diff = (lhs - d_scalar(H, at)).to_array()
    return residual_report(shape, diff)


def enumerate_gauge_freedom(shape: PhaseSpaceShape, at: PhasePoint | None = None, *, trace_only: bool = False) -> list[np.ndarray]:
    """Basis of admissible gauge tensors (Z'_mu)^nu_A.

    Off-diagonal entries are always free. With ``trace_only`` the diagonal
    entries may also vary subject to a vanishing sum over mu.
    """
    if not shape.extended:
        raise PhaseSpaceError("gauge freedom is defined on the extended space")
    n, N = shape.n, shape.N
    basis = []
    for mu in range(n):
        for nu in range(n):
            for A in range(N):
                if mu == nu:
                    continue
                t = np.zeros((n, n, N))
                t[mu, nu, A] = 1.0
                basis.append(t)
    if trace_only:
        for mu in range(n - 1):
            for A in range(N):
                t = np.zeros((n, n, N))
                t[mu, mu, A] = 1.0
                t[n - 1, n - 1, A] = -1.0
                basis.append(t)
    return basis
