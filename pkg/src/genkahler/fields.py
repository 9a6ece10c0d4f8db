"""Trigonometric-polynomial fields on the flat torus T^m.

Everything is a finite Fourier sum ``f(x) = sum_k c_k exp(i <k, x>)`` over
integer frequency vectors ``k``; the torus has coordinates in [0, 2pi)^m and
unit total measure.  Coefficients are either vectors (:class:`FourierField`)
or matrices (:class:`FourierOperatorField`); operator fields compose and act
by coefficient convolution.

The module also provides the geometry that lives naturally on fields: the
twisted exterior derivative, the (non-skew) bracket of sections of the
doubled bundle, and the integrability torsion of a constant structure against
a constant closed three-form.
"""

from __future__ import annotations

import itertools
from collections.abc import Mapping

import numpy as np

from genkahler.clifford import (
    clifford_vector_matrix,
    natural_pairing,
    pairing_matrix,
    spinor_dim,
    two_form_spinor,
    wedge_matrices,
    wedge_operator,
)
from genkahler.structures import iso_projectors, l_frame, require_gcs

__all__ = [
    "FourierField",
    "FourierOperatorField",
    "frequencies_box",
    "uniform_points",
    "random_field",
    "three_form_spinor",
    "require_three_form",
    "twisted_derivative",
    "derivative_block",
    "one_form_differential",
    "courant_bracket",
    "dual_l_frames",
    "nijenhuis_tensor",
    "torsion_clifford_element",
    "torsion_operator",
    "integrability_defect",
]

Frequency = tuple[int, ...]


def _freq_key(k, torus_dim: int) -> Frequency:
    key = tuple(int(v) for v in k)
    if len(key) != torus_dim:
        raise ValueError(f"frequency {key} does not live on T^{torus_dim}")
    return key


class FourierField:
    """Vector-valued trigonometric polynomial ``sum_k c_k exp(i <k, x>)``."""

    def __init__(self, torus_dim: int, value_dim: int, coeffs: Mapping | None = None):
        self.torus_dim = int(torus_dim)
        self.value_dim = int(value_dim)
        self.coeffs: dict[Frequency, np.ndarray] = {}
        for k, c in (coeffs or {}).items():
            c = np.asarray(c, dtype=complex)
            if c.shape != (self.value_dim,):
                raise ValueError(f"coefficient shape {c.shape} != ({self.value_dim},)")
            self.coeffs[_freq_key(k, self.torus_dim)] = c.copy()

    @classmethod
    def constant(cls, torus_dim: int, value) -> "FourierField":
        value = np.asarray(value, dtype=complex)
        return cls(torus_dim, value.shape[0], {(0,) * torus_dim: value})

    def copy(self) -> "FourierField":
        return FourierField(self.torus_dim, self.value_dim, self.coeffs)

    def support(self) -> list[Frequency]:
        return sorted(self.coeffs)

    def __getitem__(self, k) -> np.ndarray:
        return self.coeffs.get(_freq_key(k, self.torus_dim), np.zeros(self.value_dim, dtype=complex))

    def _binary(self, other: "FourierField", sign: float) -> "FourierField":
        if (other.torus_dim, other.value_dim) != (self.torus_dim, self.value_dim):
            raise ValueError("field shapes do not match")
        out = self.copy()
        for k, c in other.coeffs.items():
            out.coeffs[k] = out.coeffs.get(k, 0.0) + sign * c
        return out

    def __add__(self, other):
        return self._binary(other, 1.0)

    def __sub__(self, other):
        return self._binary(other, -1.0)

    def __mul__(self, scalar):
        out = FourierField(self.torus_dim, self.value_dim)
        out.coeffs = {k: complex(scalar) * c for k, c in self.coeffs.items()}
        return out

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def conj(self) -> "FourierField":
        """Complex conjugate of the function (frequencies flip sign)."""
        out = FourierField(self.torus_dim, self.value_dim)
        out.coeffs = {tuple(-v for v in k): c.conj() for k, c in self.coeffs.items()}
        return out

    def map_values(self, func) -> "FourierField":
        items = {k: np.asarray(func(c), dtype=complex) for k, c in sorted(self.coeffs.items())}
        dim = next(iter(items.values())).shape[0] if items else self.value_dim
        return FourierField(self.torus_dim, dim, items)

    def prune(self, tol: float = 1e-14) -> "FourierField":
        out = FourierField(self.torus_dim, self.value_dim)
        out.coeffs = {k: c.copy() for k, c in self.coeffs.items() if np.linalg.norm(c) > tol}
        return out

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros((points.shape[0], self.value_dim), dtype=complex)
        for k, c in sorted(self.coeffs.items()):
            phase = np.exp(1j * points @ np.asarray(k, dtype=float))
            out += phase[:, None] * c
        return out

    def coeff_norm(self) -> float:
        """L2 norm of the coefficient data; equals the L2(T^m) norm by Parseval."""
        if not self.coeffs:
            return 0.0
        return float(np.sqrt(sum(np.vdot(c, c).real for c in self.coeffs.values())))

    def is_real(self, tol: float = 1e-12) -> bool:
        return (self - self.conj()).coeff_norm() <= tol * max(1.0, self.coeff_norm())


class FourierOperatorField:
    """Matrix-valued trigonometric polynomial; composes and acts by convolution."""

    def __init__(self, torus_dim: int, value_dim: int, coeffs: Mapping | None = None):
        self.torus_dim = int(torus_dim)
        self.value_dim = int(value_dim)
        self.coeffs: dict[Frequency, np.ndarray] = {}
        for k, c in (coeffs or {}).items():
            c = np.asarray(c, dtype=complex)
            if c.shape != (self.value_dim, self.value_dim):
                raise ValueError(f"coefficient shape {c.shape} != square {self.value_dim}")
            self.coeffs[_freq_key(k, self.torus_dim)] = c.copy()

    @classmethod
    def constant(cls, torus_dim: int, value) -> "FourierOperatorField":
        value = np.asarray(value, dtype=complex)
        return cls(torus_dim, value.shape[0], {(0,) * torus_dim: value})

    @classmethod
    def identity(cls, torus_dim: int, value_dim: int) -> "FourierOperatorField":
        return cls.constant(torus_dim, np.eye(value_dim))

    def copy(self) -> "FourierOperatorField":
        return FourierOperatorField(self.torus_dim, self.value_dim, self.coeffs)

    def support(self) -> list[Frequency]:
        return sorted(self.coeffs)

    def __getitem__(self, k) -> np.ndarray:
        key = _freq_key(k, self.torus_dim)
        if key in self.coeffs:
            return self.coeffs[key]
        return np.zeros((self.value_dim, self.value_dim), dtype=complex)

    def _binary(self, other, sign: float) -> "FourierOperatorField":
        if (other.torus_dim, other.value_dim) != (self.torus_dim, self.value_dim):
            raise ValueError("operator field shapes do not match")
        out = self.copy()
        for k, c in other.coeffs.items():
            out.coeffs[k] = out.coeffs.get(k, 0.0) + sign * c
        return out

    def __add__(self, other):
        return self._binary(other, 1.0)

    def __sub__(self, other):
        return self._binary(other, -1.0)

    def __mul__(self, scalar):
        out = FourierOperatorField(self.torus_dim, self.value_dim)
        out.coeffs = {k: complex(scalar) * c for k, c in self.coeffs.items()}
        return out

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def __matmul__(self, other: "FourierOperatorField") -> "FourierOperatorField":
        if not isinstance(other, FourierOperatorField):
            return NotImplemented
        if (other.torus_dim, other.value_dim) != (self.torus_dim, self.value_dim):
            raise ValueError("operator field shapes do not match")
        out = FourierOperatorField(self.torus_dim, self.value_dim)
        for p, A in sorted(self.coeffs.items()):
            for q, B in sorted(other.coeffs.items()):
                key = tuple(pi + qi for pi, qi in zip(p, q))
                acc = out.coeffs.get(key)
                out.coeffs[key] = A @ B if acc is None else acc + A @ B
        return out

    def act(self, field: FourierField) -> FourierField:
        if field.torus_dim != self.torus_dim or field.value_dim != self.value_dim:
            raise ValueError("operator and field shapes do not match")
        out = FourierField(self.torus_dim, self.value_dim)
        for p, A in sorted(self.coeffs.items()):
            for q, c in sorted(field.coeffs.items()):
                key = tuple(pi + qi for pi, qi in zip(p, q))
                acc = out.coeffs.get(key)
                out.coeffs[key] = A @ c if acc is None else acc + A @ c
        return out

    def conj(self) -> "FourierOperatorField":
        out = FourierOperatorField(self.torus_dim, self.value_dim)
        out.coeffs = {tuple(-v for v in k): c.conj() for k, c in self.coeffs.items()}
        return out

    def map_values(self, func) -> "FourierOperatorField":
        items = {k: np.asarray(func(c), dtype=complex) for k, c in sorted(self.coeffs.items())}
        dim = next(iter(items.values())).shape[0] if items else self.value_dim
        return FourierOperatorField(self.torus_dim, dim, items)

    def prune(self, tol: float = 1e-14) -> "FourierOperatorField":
        out = FourierOperatorField(self.torus_dim, self.value_dim)
        out.coeffs = {k: c.copy() for k, c in self.coeffs.items() if np.linalg.norm(c) > tol}
        return out

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros((points.shape[0], self.value_dim, self.value_dim), dtype=complex)
        for k, c in sorted(self.coeffs.items()):
            phase = np.exp(1j * points @ np.asarray(k, dtype=float))
            out += phase[:, None, None] * c
        return out

    def coeff_norm(self) -> float:
        if not self.coeffs:
            return 0.0
        return float(np.sqrt(sum(np.linalg.norm(c) ** 2 for c in self.coeffs.values())))

    def is_real(self, tol: float = 1e-12) -> bool:
        return (self - self.conj()).coeff_norm() <= tol * max(1.0, self.coeff_norm())


# ---------------------------------------------------------------------------
# sampling helpers


def frequencies_box(torus_dim: int, max_norm: int) -> list[Frequency]:
    """All integer frequencies with sup-norm at most ``max_norm``, sorted."""
    rng = range(-max_norm, max_norm + 1)
    return sorted(itertools.product(rng, repeat=torus_dim))


def uniform_points(rng: np.random.Generator, count: int, torus_dim: int) -> np.ndarray:
    return rng.uniform(0.0, 2.0 * np.pi, size=(count, torus_dim))


def random_field(
    rng: np.random.Generator,
    torus_dim: int,
    value_dim: int,
    freqs: list | None = None,
    scale: float = 1.0,
    real: bool = False,
) -> FourierField:
    """Gaussian random field over a frequency support (default: box of radius 1)."""
    if freqs is None:
        freqs = frequencies_box(torus_dim, 1)
    field = FourierField(torus_dim, value_dim)
    for k in freqs:
        c = rng.normal(scale=scale, size=value_dim) + 1j * rng.normal(scale=scale, size=value_dim)
        key = _freq_key(k, torus_dim)
        field.coeffs[key] = field.coeffs.get(key, 0.0) + c
    if real:
        field = 0.5 * (field + field.conj())
    return field


# ---------------------------------------------------------------------------
# three-forms and the twisted derivative


def require_three_form(h: np.ndarray, torus_dim: int) -> np.ndarray:
    """Validate a constant three-form given as a totally antisymmetric array."""
    h = np.asarray(h, dtype=float)
    if h.shape != (torus_dim,) * 3:
        raise ValueError(f"three-form shape {h.shape} != {(torus_dim,) * 3}")
    for perm, sign in (((0, 2, 1), -1), ((1, 0, 2), -1), ((1, 2, 0), 1)):
        if np.linalg.norm(np.transpose(h, perm) - sign * h) > 1e-12 * max(1.0, np.linalg.norm(h)):
            raise ValueError("three-form array is not totally antisymmetric")
    return h


def three_form_spinor(h: np.ndarray) -> np.ndarray:
    """Spinor vector of a constant three-form array ``h[a,b,c] = H(d_a,d_b,d_c)``."""
    m = np.asarray(h).shape[0]
    h = require_three_form(h, m)
    out = np.zeros(spinor_dim(m), dtype=complex)
    for a in range(m):
        for b in range(a + 1, m):
            for c in range(b + 1, m):
                out[(1 << a) | (1 << b) | (1 << c)] = h[a, b, c]
    return out


def derivative_block(k, m: int, h: np.ndarray | None = None) -> np.ndarray:
    """Matrix of the twisted derivative on the frequency-k coefficient:
    ``i sum_j k_j dx_j ^ .`` plus wedging by the three-form."""
    W = wedge_matrices(m)
    out = np.zeros((spinor_dim(m), spinor_dim(m)), dtype=complex)
    for j, kj in enumerate(k):
        if kj:
            out += 1j * kj * W[j]
    if h is not None:
        out = out + wedge_operator(three_form_spinor(h))
    return out


def twisted_derivative(phi: FourierField, h: np.ndarray | None = None) -> FourierField:
    """Exterior derivative twisted by a constant three-form: ``d(.) + H ^ .``."""
    m = phi.torus_dim
    if phi.value_dim != spinor_dim(m):
        raise ValueError("field values are not forms on the torus")
    out = FourierField(m, phi.value_dim)
    for k, c in sorted(phi.coeffs.items()):
        out.coeffs[k] = derivative_block(k, m, h) @ c
    return out


def one_form_differential(xi: FourierField) -> FourierOperatorField:
    """Two-form coefficients ``(d xi)(d_a, d_b)`` of the differential of a one-form."""
    m = xi.torus_dim
    if xi.value_dim != m:
        raise ValueError("expected a one-form field with m components")
    out = FourierOperatorField(m, m)
    for k, c in sorted(xi.coeffs.items()):
        kv = np.asarray(k, dtype=float)
        out.coeffs[k] = 1j * (np.outer(kv, c) - np.outer(c, kv))
    return out


# ---------------------------------------------------------------------------
# bracket and torsion


def courant_bracket(e1: FourierField, e2: FourierField, h: np.ndarray | None = None) -> FourierField:
    """Non-skew bracket of sections of the doubled bundle, twisted by ``h``.

    Acts as the Lie derivative along the first argument's vector part on the
    second argument, minus contraction of the first's one-form differential,
    plus the three-form contracted with both vector parts.
    """
    if e1.torus_dim != e2.torus_dim or e1.value_dim != e2.value_dim:
        raise ValueError("bracket operands must match")
    m = e1.torus_dim
    if e1.value_dim != 2 * m:
        raise ValueError("bracket needs sections of the doubled bundle")
    if h is not None:
        h = require_three_form(h, m)
    out = FourierField(m, 2 * m)
    for k, u in sorted(e1.coeffs.items()):
        kv = np.asarray(k, dtype=float)
        X, xi = u[:m], u[m:]
        for l, v in sorted(e2.coeffs.items()):
            lv = np.asarray(l, dtype=float)
            Y, eta = v[:m], v[m:]
            lX = lv @ X
            kY = kv @ Y
            vec = 1j * (lX * Y - kY * X)
            cov = 1j * (lX * eta + (eta @ X) * kv - kY * xi + (xi @ Y) * kv)
            if h is not None:
                cov = cov - np.einsum("abj,a,b->j", h, X, Y)
            key = tuple(ki + li for ki, li in zip(k, l))
            acc = out.coeffs.get(key)
            contrib = np.concatenate([vec, cov])
            out.coeffs[key] = contrib if acc is None else acc + contrib
    return out


def dual_l_frames(J: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Frames ``(l, lbar)`` of the +-i eigenspaces with ``2 <l_a, lbar_b> = delta``."""
    J = require_gcs(J)
    m = J.shape[0] // 2
    lfr = l_frame(J)
    lbar = lfr.conj()
    M = 2.0 * lfr.T @ pairing_matrix(m) @ lbar
    l_dual = lfr @ np.linalg.inv(M).T
    return l_dual, lbar


def nijenhuis_tensor(J: np.ndarray, h: np.ndarray | None = None) -> np.ndarray:
    """Torsion ``N[a,b,c] = -2 <[[lbar_a, lbar_b]], lbar_c>`` of a constant
    structure against a constant three-form, on the conjugate eigenframe."""
    J = require_gcs(J)
    m = J.shape[0] // 2
    _, lbar = dual_l_frames(J)
    sections = [FourierField.constant(m, lbar[:, a]) for a in range(m)]
    N = np.zeros((m, m, m), dtype=complex)
    zero = (0,) * m
    for a in range(m):
        for b in range(m):
            br = courant_bracket(sections[a], sections[b], h)[zero]
            for c in range(m):
                N[a, b, c] = -2.0 * natural_pairing(br, lbar[:, c])
    return N


def torsion_clifford_element(J: np.ndarray, h: np.ndarray | None = None) -> np.ndarray:
    """Clifford cube ``sum_{a<b<c} N[a,b,c] l_a l_b l_c`` over the dual frame."""
    J = require_gcs(J)
    m = J.shape[0] // 2
    l_dual, _ = dual_l_frames(J)
    N = nijenhuis_tensor(J, h)
    cls = [clifford_vector_matrix(l_dual[:, a]) for a in range(m)]
    out = np.zeros((spinor_dim(m), spinor_dim(m)), dtype=complex)
    for a in range(m):
        for b in range(a + 1, m):
            for c in range(b + 1, m):
                out += N[a, b, c] * cls[a] @ cls[b] @ cls[c]
    return out


def torsion_operator(J: np.ndarray, h: np.ndarray | None = None) -> np.ndarray:
    """Level-raising (+3) component of the twisted derivative on constant forms."""
    J = require_gcs(J)
    m = J.shape[0] // 2
    proj = iso_projectors(J)
    n = m // 2
    if h is None:
        return np.zeros((spinor_dim(m), spinor_dim(m)), dtype=complex)
    Hw = wedge_operator(three_form_spinor(h))
    out = np.zeros((spinor_dim(m), spinor_dim(m)), dtype=complex)
    for k in range(-n, n + 1):
        if k + 3 in proj:
            out += proj[k + 3] @ Hw @ proj[k]
    return out


def integrability_defect(J: np.ndarray, h: np.ndarray | None = None) -> float:
    """Norm of the level-raising component of the twisted derivative."""
    return float(np.linalg.norm(torsion_operator(J, h)))
