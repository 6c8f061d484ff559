"""Sparse exterior algebra on a finite-dimensional real vector space.

Multivectors and forms are stored as maps from strictly increasing index
tuples to real coefficients. Interior products put the factors of a
multivector into the leading slots of a form, in factor order:

    (Z_1 ^ ... ^ Z_k) _| w = w(Z_1, ..., Z_k, ., ..., .)
"""

from __future__ import annotations

import itertools
import math
from bisect import bisect_right
from dataclasses import dataclass
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

EPS = np.finfo(float).eps
FD_STEP = EPS ** (1.0 / 3.0)


class ExteriorError(ValueError):
    """Base class for exterior-algebra errors."""


class BasisMismatchError(ExteriorError):
    pass


class GradeError(ExteriorError):
    pass


class ZeroInputError(ExteriorError):
    pass


@dataclass(frozen=True)
class GradedBasis:
    """Ordered coordinate labels, optionally partitioned into named blocks.

    ``blocks`` is a tuple of ``(name, size)`` pairs; for phase-space charts
    it is ``(("x", n), ("v", N), ("p", n*N), ("e", 0 or 1))``.
    """

    labels: tuple[str, ...]
    blocks: tuple[tuple[str, int], ...] | None = None

    def __post_init__(self):
        if len(self.labels) == 0:
            raise ValueError("basis must have positive dimension")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("basis labels must be unique")
        if self.blocks is not None:
            if sum(size for _, size in self.blocks) != len(self.labels):
                raise ValueError("block sizes must sum to the dimension")

    @property
    def dim(self) -> int:
        return len(self.labels)

    @classmethod
    def plain(cls, dim: int, prefix: str = "e") -> "GradedBasis":
        if dim < 1:
            raise ValueError("dimension must be positive")
        return cls(tuple(f"{prefix}{i + 1}" for i in range(dim)))

    def block_of(self, index: int) -> str | None:
        if self.blocks is None:
            return None
        start = 0
        for name, size in self.blocks:
            if index < start + size:
                return name
            start += size
        raise IndexError(index)

    def block_slice(self, name: str) -> slice:
        if self.blocks is None:
            raise KeyError(name)
        start = 0
        for block, size in self.blocks:
            if block == name:
                return slice(start, start + size)
            start += size
        raise KeyError(name)


def _sort_with_sign(idx: Sequence[int]) -> tuple[tuple[int, ...], int]:
    """Sort an index tuple, returning the permutation sign (0 on repeats)."""
    idx = list(idx)
    if len(set(idx)) != len(idx):
        return (), 0
    sign = 1
    # insertion sort; each swap flips the sign
    for i in range(1, len(idx)):
        j = i
        while j > 0 and idx[j - 1] > idx[j]:
            idx[j - 1], idx[j] = idx[j], idx[j - 1]
            sign = -sign
            j -= 1
    return tuple(idx), sign


def merge_sign(a: Sequence[int], b: Sequence[int]) -> int:
    """Sign of the shuffle taking the concatenation ``a + b`` to sorted order.

    Both inputs must be strictly increasing; returns 0 if they share an index.
    """
    if set(a) & set(b):
        return 0
    inversions = 0
    for j in b:
        inversions += len(a) - bisect_right(a, j)
    return -1 if inversions % 2 else 1


class _Alternating:
    __slots__ = ("basis", "grade", "_terms")

    def __init__(self, basis: GradedBasis, grade: int, terms: Mapping | None = None):
        if not 0 <= grade <= basis.dim:
            raise GradeError(f"grade {grade} outside [0, {basis.dim}]")
        acc: dict[tuple[int, ...], float] = {}
        for idx, coef in (terms or {}).items():
            idx = tuple(int(i) for i in idx)
            if len(idx) != grade:
                raise GradeError(f"index {idx} does not have grade {grade}")
            if any(i < 0 or i >= basis.dim for i in idx):
                raise IndexError(f"index {idx} outside basis of dimension {basis.dim}")
            key, sign = _sort_with_sign(idx)
            if sign == 0:
                continue
            acc[key] = acc.get(key, 0.0) + sign * float(coef)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "grade", grade)
        object.__setattr__(self, "_terms", MappingProxyType({k: v for k, v in sorted(acc.items()) if v != 0.0}))

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    @property
    def terms(self) -> Mapping[tuple[int, ...], float]:
        return self._terms

    @property
    def dim(self) -> int:
        return self.basis.dim

    @classmethod
    def zero(cls, basis: GradedBasis, grade: int):
        return cls(basis, grade)

    @classmethod
    def monomial(cls, basis: GradedBasis, idx: Sequence[int], coef: float = 1.0):
        return cls(basis, len(idx), {tuple(idx): coef})

    @classmethod
    def scalar(cls, basis: GradedBasis, value: float):
        return cls(basis, 0, {(): value})

    @classmethod
    def from_array(cls, basis: GradedBasis, grade: int, values: Iterable[float]):
        """Build from coefficients listed in lexicographic subset order."""
        values = np.asarray(values, dtype=float).ravel()
        keys = list(itertools.combinations(range(basis.dim), grade))
        if len(values) != len(keys):
            raise ValueError(f"expected {len(keys)} coefficients, got {len(values)}")
        return cls(basis, grade, dict(zip(keys, values)))

    def to_array(self) -> np.ndarray:
        keys = itertools.combinations(range(self.dim), self.grade)
        return np.array([self._terms.get(k, 0.0) for k in keys], dtype=float)

    def coefficient(self, idx: Sequence[int]) -> float:
        key, sign = _sort_with_sign(idx)
        if sign == 0:
            return 0.0
        return sign * self._terms.get(key, 0.0)

    def norm(self) -> float:
        return math.sqrt(sum(c * c for c in self._terms.values()))

    def max_abs(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    def is_zero(self, tol: float = 0.0) -> bool:
        return self.max_abs() <= tol

    def allclose(self, other, atol: float = 1e-12) -> bool:
        return (self - other).max_abs() <= atol

    def _check_compatible(self, other):
        if type(other) is not type(self):
            raise TypeError(f"cannot combine {type(self).__name__} with {type(other).__name__}")
        if other.basis != self.basis:
            raise BasisMismatchError("operands live on different bases")

    def __add__(self, other):
        self._check_compatible(other)
        if other.grade != self.grade:
            raise GradeError("cannot add elements of different grade")
        acc = dict(self._terms)
        for k, v in other._terms.items():
            acc[k] = acc.get(k, 0.0) + v
        return type(self)(self.basis, self.grade, acc)

    def __neg__(self):
        return type(self)(self.basis, self.grade, {k: -v for k, v in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return type(self)(self.basis, self.grade, {k: scalar * v for k, v in self._terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / scalar)

    def __xor__(self, other):
        return wedge(self, other)

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self.basis == other.basis and self.grade == other.grade and dict(self._terms) == dict(other._terms)

    def __hash__(self):
        return hash((type(self).__name__, self.basis, self.grade, tuple(self._terms.items())))

    def _render(self, prefix: str) -> str:
        if not self._terms:
            return "0"
        parts = []
        for idx, c in self._terms.items():
            name = "^".join(prefix + self.basis.labels[i] for i in idx) or "1"
            parts.append(f"{c:+.6g}*{name}")
        return " ".join(parts)


class Multivector(_Alternating):
    """Antisymmetric contravariant tensor of fixed grade."""

    __slots__ = ()

    @classmethod
    def vector(cls, basis: GradedBasis, components: Iterable[float]) -> "Multivector":
        comps = np.asarray(components, dtype=float).ravel()
        if comps.size != basis.dim:
            raise ValueError(f"expected {basis.dim} components, got {comps.size}")
        return cls(basis, 1, {(i,): c for i, c in enumerate(comps)})

    def to_vector(self) -> np.ndarray:
        if self.grade != 1:
            raise GradeError("only grade-1 multivectors convert to vectors")
        return self.to_array()

    def __repr__(self):
        return f"Multivector(grade={self.grade}, {self._render('d_')})"


class Form(_Alternating):
    """Antisymmetric covariant tensor of fixed grade."""

    __slots__ = ()

    @classmethod
    def covector(cls, basis: GradedBasis, components: Iterable[float]) -> "Form":
        comps = np.asarray(components, dtype=float).ravel()
        if comps.size != basis.dim:
            raise ValueError(f"expected {basis.dim} components, got {comps.size}")
        return cls(basis, 1, {(i,): c for i, c in enumerate(comps)})

    def __repr__(self):
        return f"Form(grade={self.grade}, {self._render('d')})"


def wedge(a: _Alternating, b: _Alternating) -> _Alternating:
    """Exterior product of two multivectors (or two forms)."""
    a._check_compatible(b)
    grade = a.grade + b.grade
    if grade > a.dim:
        raise GradeError(f"wedge of grades {a.grade} and {b.grade} exceeds dimension {a.dim}")
    acc: dict[tuple[int, ...], float] = {}
    for ia, ca in a.terms.items():
        for ib, cb in b.terms.items():
            sign = merge_sign(ia, ib)
            if sign == 0:
                continue
            key = tuple(sorted(ia + ib))
            acc[key] = acc.get(key, 0.0) + sign * ca * cb
    return type(a)(a.basis, grade, acc)


def wedge_vectors(basis: GradedBasis, vectors: Sequence) -> Multivector:
    """Wedge of grade-1 factors, computed from the k x k minors of their matrix.

    Accepts grade-1 multivectors or plain component arrays.
    """
    rows = [v.to_vector() if isinstance(v, Multivector) else np.asarray(v, dtype=float) for v in vectors]
    k = len(rows)
    if k == 0:
        return Multivector.scalar(basis, 1.0)
    if k > basis.dim:
        raise GradeError(f"cannot wedge {k} vectors in dimension {basis.dim}")
    mat = np.vstack(rows)
    if mat.shape[1] != basis.dim:
        raise BasisMismatchError("vector length does not match basis dimension")
    keys = list(itertools.combinations(range(basis.dim), k))
    cols = np.array(keys)
    minors = np.linalg.det(mat[:, cols].transpose(1, 0, 2))
    return Multivector(basis, k, dict(zip(keys, minors)))


def contract(X: Multivector, w: Form) -> Form:
    """Interior product ``X _| w``: the factors of X fill the first slots of w."""
    if not isinstance(X, Multivector) or not isinstance(w, Form):
        raise TypeError("contract expects a Multivector and a Form")
    if X.basis != w.basis:
        raise BasisMismatchError("operands live on different bases")
    if X.grade > w.grade:
        raise GradeError(f"cannot contract a grade-{X.grade} multivector into a {w.grade}-form")
    acc: dict[tuple[int, ...], float] = {}
    for I, cx in X.terms.items():
        sI = set(I)
        for J, cw in w.terms.items():
            if not sI.issubset(J):
                continue
            rest = tuple(j for j in J if j not in sI)
            sign = merge_sign(I, rest)
            acc[rest] = acc.get(rest, 0.0) + sign * cx * cw
    return Form(w.basis, w.grade - X.grade, acc)


def null_space(M, rtol: float = 1e-10) -> np.ndarray:
    """Null-space basis of a dense matrix by Gaussian elimination with full pivoting.

    Pivots smaller than ``rtol`` times the largest column norm count as zero.
    Returns an array of shape (nullity, ncols), one basis vector per row.
    """
    A = np.array(M, dtype=float)
    m, n = A.shape
    scale = np.linalg.norm(A, axis=0).max() if A.size else 0.0
    if scale == 0.0:
        return np.eye(n)
    tol = rtol * scale
    perm = np.arange(n)
    r = 0
    while r < min(m, n):
        sub = np.abs(A[r:, r:])
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        if sub[i, j] <= tol:
            break
        A[[r, r + i]] = A[[r + i, r]]
        A[:, [r, r + j]] = A[:, [r + j, r]]
        perm[[r, r + j]] = perm[[r + j, r]]
        A[r] /= A[r, r]
        A[r + 1:] -= np.outer(A[r + 1:, r], A[r])
        r += 1
    U = A[:r]
    basis = np.zeros((n - r, n))
    for col, f in enumerate(range(r, n)):
        z = np.zeros(n)
        z[f] = 1.0
        # back substitution on the unit upper-triangular pivot block
        for i in range(r - 1, -1, -1):
            z[i] = -U[i, f] - U[i, i + 1:r] @ z[i + 1:r]
        basis[col, perm] = z
    return basis


def _wedge_matrix(X: Multivector) -> np.ndarray:
    """Matrix of the linear map v -> v ^ X, one column per basis vector."""
    D, k = X.dim, X.grade
    keys = {key: row for row, key in enumerate(itertools.combinations(range(D), k + 1))}
    M = np.zeros((len(keys), D))
    for i in range(D):
        for I, c in X.terms.items():
            sign = merge_sign((i,), I)
            if sign:
                M[keys[tuple(sorted((i,) + I))], i] += sign * c
    return M


def annihilator(X: Multivector, rtol: float = 1e-10) -> list[Multivector]:
    """Basis of the vectors v with v ^ X = 0."""
    if X.is_zero():
        raise ZeroInputError("annihilator of the zero multivector is the whole space")
    if X.grade == X.dim:
        return [Multivector.vector(X.basis, row) for row in np.eye(X.dim)]
    return [Multivector.vector(X.basis, row) for row in null_space(_wedge_matrix(X), rtol)]


@dataclass(frozen=True)
class DecomposabilityReport:
    decomposable: bool
    annihilator_dim: int
    factors: tuple[Multivector, ...] | None = None
    scale: float | None = None


def is_decomposable(X: Multivector, rtol: float = 1e-10) -> DecomposabilityReport:
    """Decide whether X is a wedge of vectors via the dimension of its annihilator.

    When it is, the annihilator basis gives the factors and ``scale`` is the
    factor by which their wedge must be multiplied to reproduce X.
    """
    if X.is_zero():
        raise ZeroInputError("decomposability of the zero multivector is undefined")
    if X.grade == 0:
        raise GradeError("grade must be at least 1")
    ann = annihilator(X, rtol)
    k = X.grade
    if len(ann) != k:
        return DecomposabilityReport(False, len(ann))
    W = wedge_vectors(X.basis, ann)
    key = max(X.terms, key=lambda idx: abs(X.terms[idx]))
    scale = X.terms[key] / W.coefficient(key)
    return DecomposabilityReport(True, k, tuple(ann), scale)


@dataclass(frozen=True)
class Metric:
    """Diagonal metric ``g = diag(signature)``."""

    signature: tuple[float, ...]

    def __post_init__(self):
        sig = tuple(float(s) for s in self.signature)
        if not sig or any(s == 0.0 for s in sig):
            raise ValueError("metric entries must be nonzero")
        object.__setattr__(self, "signature", sig)

    @classmethod
    def euclidean(cls, dim: int) -> "Metric":
        return cls((1.0,) * dim)

    @classmethod
    def minkowski(cls, dim: int) -> "Metric":
        """Signature (+, -, ..., -)."""
        return cls((1.0,) + (-1.0,) * (dim - 1))

    @property
    def dim(self) -> int:
        return len(self.signature)

    @property
    def det(self) -> float:
        return float(np.prod(self.signature))

    @property
    def diag(self) -> np.ndarray:
        return np.array(self.signature)

    @property
    def inverse_diag(self) -> np.ndarray:
        return 1.0 / np.array(self.signature)

    def inner(self, a, b) -> float:
        return float(np.sum(self.diag * np.asarray(a, dtype=float) * np.asarray(b, dtype=float)))


def hodge_star(X: Multivector, g: Metric) -> Multivector:
    """Hodge dual w.r.t. a diagonal metric with orientation e_1 ^ ... ^ e_D.

    Normalised so that ``a ^ *b = g(a, b) e_1 ^ ... ^ e_D / sqrt|det g|``.
    """
    D = X.dim
    if g.dim != D:
        raise BasisMismatchError(f"metric of dimension {g.dim} on a basis of dimension {D}")
    norm = 1.0 / math.sqrt(abs(g.det))
    acc = {}
    for I, c in X.terms.items():
        comp = tuple(i for i in range(D) if i not in I)
        weight = math.prod(g.signature[i] for i in I)
        acc[comp] = c * weight * merge_sign(I, comp) * norm
    return Multivector(X.basis, D - X.grade, acc)


@dataclass(frozen=True)
class VectorField:
    """Vector field in a chart, with an optional analytic Jacobian.

    ``jacobian(y)[i, j]`` is the derivative of component i along coordinate j.
    """

    func: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, y) -> np.ndarray:
        return np.asarray(self.func(np.asarray(y, dtype=float)), dtype=float)

    def jac(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(y), dtype=float)
        return fd_jacobian(self.func, y)

    @classmethod
    def constant(cls, components) -> "VectorField":
        comps = np.asarray(components, dtype=float)
        return cls(lambda y: comps, lambda y: np.zeros((comps.size, comps.size)))


def fd_jacobian(func: Callable, y: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central-difference Jacobian with step ``step * (1 + |y_j|)`` per coordinate."""
    y = np.asarray(y, dtype=float)
    cols = []
    for j in range(y.size):
        h = step * (1.0 + abs(y[j]))
        e = np.zeros_like(y)
        e[j] = h
        cols.append((np.asarray(func(y + e), dtype=float) - np.asarray(func(y - e), dtype=float)) / (2 * h))
    return np.stack(cols, axis=-1)


def lie_bracket(X: VectorField, Y: VectorField, at) -> np.ndarray:
    """Components of [X, Y] = X(Y) - Y(X) at a point."""
    y = _coords(at)
    return Y.jac(y) @ X(y) - X.jac(y) @ Y(y)


def _coords(at) -> np.ndarray:
    coords = getattr(at, "coords", at)
    return np.asarray(coords, dtype=float)


def _basis_for(at, basis: GradedBasis | None) -> GradedBasis:
    if basis is not None:
        return basis
    shape = getattr(at, "shape", None)
    if shape is not None and hasattr(shape, "basis"):
        return shape.basis()
    return GradedBasis.plain(_coords(at).size)


def schouten_decomposable(
    Xf: Sequence[VectorField],
    Yf: Sequence[VectorField],
    at,
    basis: GradedBasis | None = None,
) -> Multivector:
    """Schouten bracket of X_1 ^ ... ^ X_p with Y_1 ^ ... ^ Y_q at a point.

    Uses the double sum over (i, j) with sign (-1)^(i+j) of
    [X_i, Y_j] ^ X_1 .. (X_i omitted) .. X_p ^ Y_1 .. (Y_j omitted) .. Y_q.
    """
    if not Xf or not Yf:
        raise ValueError("both factor lists must be non-empty")
    y = _coords(at)
    basis = _basis_for(at, basis)
    xs = [f(y) for f in Xf]
    ys = [f(y) for f in Yf]
    result = Multivector.zero(basis, len(Xf) + len(Yf) - 1)
    for i, Xi in enumerate(Xf):
        for j, Yj in enumerate(Yf):
            sign = -1.0 if (i + j) % 2 else 1.0
            factors = [lie_bracket(Xi, Yj, y)] + xs[:i] + xs[i + 1:] + ys[:j] + ys[j + 1:]
            result = result + sign * wedge_vectors(basis, factors)
    return result


class Involutivity(NamedTuple):
    involutive: bool
    residual: float


def involutivity_check(
    Xf: Sequence[VectorField],
    at,
    tol: float = 1e-8,
    basis: GradedBasis | None = None,
) -> Involutivity:
    """Test [X_i, X] = lambda_i X for X = X_1 ^ ... ^ X_k at a point.

    Each lambda_i is a least-squares fit; the residual is the largest norm of
    [X_i, X] - lambda_i X over i.
    """
    y = _coords(at)
    basis = _basis_for(at, basis)
    vecs = [f(y) for f in Xf]
    X = wedge_vectors(basis, vecs)
    scale = math.prod(float(np.linalg.norm(v)) for v in vecs)
    if X.norm() <= 1e-12 * max(scale, 1e-300):
        raise ExteriorError("factors are linearly dependent at the point")
    x_arr = X.to_array()
    residual = 0.0
    for Xi in Xf:
        b = schouten_decomposable([Xi], Xf, y, basis).to_array()
        lam = (b @ x_arr) / (x_arr @ x_arr)
        residual = max(residual, float(np.linalg.norm(b - lam * x_arr)))
    return Involutivity(residual < tol, residual)
