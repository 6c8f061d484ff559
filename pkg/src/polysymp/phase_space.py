"""Adapted coordinates on the multisymplectic phase spaces.

Coordinates are laid out as ``x^1..x^n, v^1..v^N, p^mu_A (mu-major), e``
where ``e`` is the De Donder-Weyl energy coordinate, present only on the
extended space. All bundles are trivial with vanishing connection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exterior import Form, GradedBasis


class PhaseSpaceError(ValueError):
    pass


@dataclass(frozen=True)
class PhaseSpaceShape:
    n: int
    N: int
    extended: bool = True

    def __post_init__(self):
        if self.n < 1 or self.N < 1:
            raise PhaseSpaceError(f"need n >= 1 and N >= 1, got n={self.n}, N={self.N}")

    @property
    def dim(self) -> int:
        return self.n + self.N + self.n * self.N + (1 if self.extended else 0)

    @property
    def x_slice(self) -> slice:
        return slice(0, self.n)

    @property
    def v_slice(self) -> slice:
        return slice(self.n, self.n + self.N)

    @property
    def p_slice(self) -> slice:
        start = self.n + self.N
        return slice(start, start + self.n * self.N)

    @property
    def e_index(self) -> int:
        if not self.extended:
            raise PhaseSpaceError("the reduced phase space has no energy coordinate")
        return self.n + self.N + self.n * self.N

    def x_index(self, mu: int) -> int:
        return mu

    def v_index(self, A: int) -> int:
        return self.n + A

    def p_index(self, mu: int, A: int) -> int:
        return self.n + self.N + mu * self.N + A

    def reduced(self) -> "PhaseSpaceShape":
        return PhaseSpaceShape(self.n, self.N, extended=False)

    def basis(self) -> GradedBasis:
        return build_basis(self)


def build_basis(shape: PhaseSpaceShape) -> GradedBasis:
    n, N = shape.n, shape.N
    labels = [f"x{mu + 1}" for mu in range(n)]
    labels += [f"v{A + 1}" for A in range(N)]
    labels += [f"p{mu + 1}_{A + 1}" for mu in range(n) for A in range(N)]
    blocks = [("x", n), ("v", N), ("p", n * N), ("e", 1 if shape.extended else 0)]
    if shape.extended:
        labels.append("e")
    return GradedBasis(tuple(labels), tuple(blocks))


@dataclass(frozen=True, eq=False)
class PhasePoint:
    shape: PhaseSpaceShape
    x: np.ndarray
    v: np.ndarray
    p: np.ndarray
    e: float | None = None

    def __post_init__(self):
        s = self.shape
        x = np.array(self.x, dtype=float).reshape(-1)
        v = np.array(self.v, dtype=float).reshape(-1)
        p = np.array(self.p, dtype=float)
        if x.size != s.n or v.size != s.N or p.size != s.n * s.N:
            raise PhaseSpaceError("coordinate array lengths do not match the shape")
        p = p.reshape(s.n, s.N)
        if s.extended and self.e is None:
            raise PhaseSpaceError("extended phase space needs an energy coordinate")
        if not s.extended and self.e is not None:
            raise PhaseSpaceError("reduced phase space has no energy coordinate")
        for name, arr in (("x", x), ("v", v), ("p", p)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.e is not None:
            object.__setattr__(self, "e", float(self.e))

    @property
    def coords(self) -> np.ndarray:
        parts = [self.x, self.v, self.p.ravel()]
        if self.shape.extended:
            parts.append([self.e])
        return np.concatenate(parts)

    @classmethod
    def from_coords(cls, shape: PhaseSpaceShape, coords) -> "PhasePoint":
        y = np.asarray(coords, dtype=float).ravel()
        if y.size != shape.dim:
            raise PhaseSpaceError(f"expected {shape.dim} coordinates, got {y.size}")
        e = y[shape.e_index] if shape.extended else None
        return cls(shape, y[shape.x_slice], y[shape.v_slice], y[shape.p_slice], e)

    def project(self) -> "PhasePoint":
        """Drop the energy coordinate."""
        return PhasePoint(self.shape.reduced(), self.x, self.v, self.p)

    def __repr__(self):
        return f"PhasePoint(n={self.shape.n}, N={self.shape.N}, coords={self.coords.tolist()})"


def _as_coords(shape: PhaseSpaceShape, at) -> np.ndarray:
    if isinstance(at, PhasePoint):
        if at.shape != shape:
            raise PhaseSpaceError(f"point lives on {at.shape}, field on {shape}")
        return at.coords
    y = np.asarray(at, dtype=float).ravel()
    if y.size != shape.dim:
        raise PhaseSpaceError(f"expected {shape.dim} coordinates, got {y.size}")
    return y


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Scalar function of the flat coordinate vector, with optional analytic gradient."""

    shape: PhaseSpaceShape
    func: Callable[[np.ndarray], float]
    partials: Callable[[np.ndarray], np.ndarray] | None = None
    fd_step: float = 1e-5

    def __call__(self, at) -> float:
        return float(self.func(_as_coords(self.shape, at)))

    def gradient(self, at, analytic: bool = True) -> np.ndarray:
        y = _as_coords(self.shape, at)
        if analytic and self.partials is not None:
            return np.asarray(self.partials(y), dtype=float).reshape(-1)
        return self.fd_gradient(y)

    def fd_gradient(self, at, step: float | None = None) -> np.ndarray:
        y = _as_coords(self.shape, at)
        step = self.fd_step if step is None else step
        grad = np.empty_like(y)
        for j in range(y.size):
            h = step * (1.0 + abs(y[j]))
            e = np.zeros_like(y)
            e[j] = h
            grad[j] = (self.func(y + e) - self.func(y - e)) / (2 * h)
        return grad


def build_omega(shape: PhaseSpaceShape, at: PhasePoint | None = None) -> Form:
    """Multisymplectic form dv^A ^ dp^mu_A ^ d_mu x - de ^ d^n x.

    ``d_mu x`` is the contraction of the coordinate field of x^mu into the
    base volume form. Coefficients are constant, so ``at`` is not used.
    """
    if not shape.extended:
        raise PhaseSpaceError("the multisymplectic form lives on the extended space; use build_omega_vertical")
    terms = _vertical_terms(shape)
    terms[(shape.e_index,) + tuple(range(shape.n))] = -1.0
    return Form(build_basis(shape), shape.n + 1, terms)


def build_omega_vertical(shape: PhaseSpaceShape, at: PhasePoint | None = None) -> Form:
    """dv^A ^ dp^mu_A ^ d_mu x on the reduced space (vanishing connection)."""
    if shape.extended:
        raise PhaseSpaceError("the vertical form lives on the reduced space")
    return Form(build_basis(shape), shape.n + 1, _vertical_terms(shape))


def _vertical_terms(shape: PhaseSpaceShape) -> dict:
    n, N = shape.n, shape.N
    terms = {}
    for A in range(N):
        for mu in range(n):
            rest = tuple(nu for nu in range(n) if nu != mu)
            idx = (shape.v_index(A), shape.p_index(mu, A)) + rest
            terms[idx] = -1.0 if mu % 2 else 1.0
    return terms


def d_scalar(H: ScalarField, at) -> Form:
    return Form.covector(build_basis(H.shape), H.gradient(at))


def xi_pairing(H: ScalarField, at) -> float:
    """Derivative of H along the energy coordinate."""
    if not H.shape.extended:
        raise PhaseSpaceError("energy direction only exists on the extended space")
    return float(H.gradient(at)[H.shape.e_index])


def dw_function(HH: ScalarField) -> ScalarField:
    """Lift a DW Hamiltonian on the reduced space to H = -HH - e on the extended space."""
    if HH.shape.extended:
        raise PhaseSpaceError("expected a function on the reduced space")
    shape = PhaseSpaceShape(HH.shape.n, HH.shape.N, extended=True)
    e = shape.e_index

    def func(y):
        return -HH.func(y[:e]) - y[e]

    partials = None
    if HH.partials is not None:
        def partials(y):
            return np.concatenate([-np.asarray(HH.partials(y[:e]), dtype=float), [-1.0]])

    return ScalarField(shape, func, partials, HH.fd_step)


@dataclass(frozen=True, eq=False)
class Polynomial:
    """Sparse polynomial in the coordinates: sum_t coefs[t] * prod_j y_j**exponents[t, j]."""

    exponents: np.ndarray
    coefs: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __call__(self, y) -> float:
        y = np.asarray(y, dtype=float)
        return float(self.coefs @ np.prod(y ** self.exponents, axis=1))

    def gradient(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        grad = np.zeros(y.size)
        for j in range(y.size):
            ex = self.exponents.copy()
            k = ex[:, j].astype(float)
            ex[:, j] = np.maximum(ex[:, j] - 1, 0)
            grad[j] = (self.coefs * k) @ np.prod(y ** ex, axis=1)
        return grad

    def derivative(self, j: int) -> "Polynomial":
        ex = self.exponents.copy()
        k = ex[:, j].astype(float)
        ex[:, j] = np.maximum(ex[:, j] - 1, 0)
        return Polynomial(ex, self.coefs * k)

    def hessian(self, y) -> np.ndarray:
        return np.stack([self.derivative(j).gradient(y) for j in range(self.exponents.shape[1])])


def polynomial_field(shape: PhaseSpaceShape, poly: Polynomial) -> ScalarField:
    return ScalarField(shape, poly, poly.gradient)


def random_polynomial(
    nvars: int,
    rng: np.random.Generator,
    degree: int = 3,
    n_terms: int = 8,
) -> Polynomial:
    """Random sparse polynomial of total degree <= ``degree`` with O(1) coefficients."""
    exps = np.zeros((n_terms, nvars), dtype=int)
    for t in range(n_terms):
        deg = rng.integers(0, degree + 1)
        for _ in range(deg):
            exps[t, rng.integers(nvars)] += 1
    return Polynomial(exps, rng.normal(size=n_terms))


def random_dw_hamiltonian(
    shape: PhaseSpaceShape,
    rng: np.random.Generator,
    degree: int = 3,
    n_terms: int = 8,
) -> ScalarField:
    """Random polynomial DW Hamiltonian on the reduced space of ``shape``."""
    reduced = shape.reduced()
    return polynomial_field(reduced, random_polynomial(reduced.dim, rng, degree, n_terms))


def random_point(shape: PhaseSpaceShape, rng: np.random.Generator, scale: float = 1.0) -> PhasePoint:
    return PhasePoint.from_coords(shape, rng.uniform(-scale, scale, size=shape.dim))
