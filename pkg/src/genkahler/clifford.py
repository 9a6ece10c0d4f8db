"""Forms-as-spinors toolkit for the split-signature space R^m + (R^m)*.

A complex form on R^m is stored as a dense vector of length ``2**m`` indexed
by subsets of {1..m}: bit ``i`` of the index stands for ``dx_{i+1}``, and
basis monomials are written in ascending order (for m=2, index 0b11 is
dx1^dx2, index 0 is the constant 1).

Elements of the doubled space R^{2m} are stored as ``(X; xi)`` with the first
m entries the vector part and the last m the covector part.  The canonical
split-signature pairing is ``<X+xi, Y+eta> = (xi(Y) + eta(X)) / 2``; it is
complex-bilinear throughout (no conjugation).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.linalg

#: Largest supported number of torus/vector-space dimensions.  Everything is
#: dense, so spinor spaces have dimension 2**m and so-elements act on R^{2m};
#: beyond 8 the dense tables stop being a sensible design.
MAX_DIM = 8

__all__ = [
    "MAX_DIM",
    "spinor_dim",
    "degrees",
    "degree_component",
    "form_vector",
    "subset_label",
    "format_form",
    "pairing_matrix",
    "natural_pairing",
    "wedge_sign_table",
    "wedge",
    "wedge_operator",
    "top_coefficient",
    "transpose_form",
    "chevalley_gram",
    "chevalley_pairing",
    "chevalley_symmetry_sign",
    "wedge_matrices",
    "contraction_matrices",
    "clifford_vector_matrix",
    "clifford_act",
    "so_residual",
    "require_so",
    "so_from_blocks",
    "so_decompose",
    "so_from_pair",
    "two_form_so",
    "bivector_so",
    "two_form_spinor",
    "random_so_element",
    "spin_lie_action",
    "spin_group_exp",
    "so_exp",
]


def _check_m(m: int) -> int:
    m = int(m)
    if not 1 <= m <= MAX_DIM:
        raise ValueError(f"dimension m={m} outside supported range 1..{MAX_DIM}")
    return m


def spinor_dim(m: int) -> int:
    """Dimension ``2**m`` of the space of forms on R^m."""
    return 1 << _check_m(m)


def _infer_m_from_spinor(phi: np.ndarray) -> int:
    n = phi.shape[-1]
    m = n.bit_length() - 1
    if 1 << m != n:
        raise ValueError(f"spinor length {n} is not a power of two")
    return _check_m(m)


def _infer_m_from_so(alpha: np.ndarray) -> int:
    if alpha.ndim != 2 or alpha.shape[0] != alpha.shape[1] or alpha.shape[0] % 2:
        raise ValueError(f"expected a square 2m x 2m matrix, got shape {alpha.shape}")
    return _check_m(alpha.shape[0] // 2)


@lru_cache(maxsize=None)
def degrees(m: int) -> np.ndarray:
    """Form degree (bit count) of every subset index, shape ``(2**m,)``."""
    out = np.bitwise_count(np.arange(spinor_dim(m), dtype=np.uint64)).astype(np.int64)
    out.setflags(write=False)
    return out


def degree_component(phi: np.ndarray, k: int) -> np.ndarray:
    """Project a form vector onto its degree-``k`` part."""
    phi = np.asarray(phi, dtype=complex)
    m = _infer_m_from_spinor(phi)
    return np.where(degrees(m) == k, phi, 0.0)


def form_vector(m: int, components: dict[tuple[int, ...], complex]) -> np.ndarray:
    """Build a form vector from ``{(i1, .., ik): coeff}`` with 1-based indices.

    Index tuples may come in any order; odd permutations flip the sign.
    ``()`` is the constant term.

    >>> form_vector(2, {(): 1.0, (2, 1): 3.0})  # 1 - 3 dx1^dx2
    array([ 1.+0.j,  0.+0.j,  0.+0.j, -3.+0.j])
    """
    m = _check_m(m)
    out = np.zeros(spinor_dim(m), dtype=complex)
    for idxs, coeff in components.items():
        if len(set(idxs)) != len(idxs):
            raise ValueError(f"repeated index in {idxs}")
        if idxs and not all(1 <= i <= m for i in idxs):
            raise ValueError(f"indices {idxs} out of range 1..{m}")
        # parity of the permutation sorting idxs ascending
        sign = 1
        idx_list = list(idxs)
        for a in range(len(idx_list)):
            for b in range(a + 1, len(idx_list)):
                if idx_list[a] > idx_list[b]:
                    sign = -sign
        bits = 0
        for i in idxs:
            bits |= 1 << (i - 1)
        out[bits] += sign * coeff
    return out


def subset_label(index: int) -> str:
    """Human-readable monomial for a subset index, e.g. ``dx1^dx3``."""
    if index == 0:
        return "1"
    return "^".join(f"dx{i + 1}" for i in range(index.bit_length()) if index >> i & 1)


def format_form(phi: np.ndarray, tol: float = 1e-12) -> str:
    """Render a form vector as a short monomial sum (for logs and debugging)."""
    phi = np.asarray(phi, dtype=complex)
    _infer_m_from_spinor(phi)
    parts = []
    for idx in np.flatnonzero(np.abs(phi) > tol):
        c = phi[idx]
        c_str = f"{c.real:+.6g}" if abs(c.imag) < tol else f"+({c:.6g})"
        parts.append(f"{c_str}*{subset_label(int(idx))}")
    return " ".join(parts) if parts else "0"


@lru_cache(maxsize=None)
def pairing_matrix(m: int) -> np.ndarray:
    """Gram matrix of the split-signature pairing on R^{2m} (the 1/2 convention)."""
    m = _check_m(m)
    P = np.zeros((2 * m, 2 * m))
    P[:m, m:] = 0.5 * np.eye(m)
    P[m:, :m] = 0.5 * np.eye(m)
    P.setflags(write=False)
    return P


def natural_pairing(u: np.ndarray, v: np.ndarray) -> complex:
    """Bilinear pairing ``<X+xi, Y+eta> = (xi(Y) + eta(X)) / 2``."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    m = u.shape[0] // 2
    return complex(0.5 * (u[m:] @ v[:m] + u[:m] @ v[m:]))


@lru_cache(maxsize=None)
def wedge_sign_table(m: int) -> np.ndarray:
    """Table ``t[I, J]`` with ``e_I ^ e_J = t[I, J] * e_{I(bitor)J}``.

    Zero when the subsets overlap, otherwise the parity of the shuffle that
    sorts the concatenated index lists.
    """
    m = _check_m(m)
    n = spinor_dim(m)
    idx = np.arange(n, dtype=np.uint64)
    # exponent[I, J] = sum over bits j of J of popcount(I >> (j+1))
    exponent = np.zeros((n, n), dtype=np.int64)
    for j in range(m):
        above_j = np.bitwise_count(idx >> np.uint64(j + 1)).astype(np.int64)
        has_j = ((idx >> np.uint64(j)) & np.uint64(1)).astype(np.int64)
        exponent += above_j[:, None] * has_j[None, :]
    table = np.where(exponent % 2 == 0, 1, -1).astype(np.int8)
    overlap = (idx[:, None] & idx[None, :]) != 0
    table[overlap] = 0
    table.setflags(write=False)
    return table


def wedge(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Wedge product of two form vectors."""
    f = np.asarray(f, dtype=complex)
    g = np.asarray(g, dtype=complex)
    m = _infer_m_from_spinor(f)
    if g.shape != f.shape:
        raise ValueError("wedge operands must share a dimension")
    table = wedge_sign_table(m)
    out = np.zeros_like(f)
    for I in np.flatnonzero(f):
        row = table[I]
        for J in np.flatnonzero(g):
            s = row[J]
            if s:
                out[I | J] += s * f[I] * g[J]
    return out


def wedge_operator(phi: np.ndarray) -> np.ndarray:
    """Matrix of ``psi -> phi ^ psi``."""
    phi = np.asarray(phi, dtype=complex)
    m = _infer_m_from_spinor(phi)
    n = spinor_dim(m)
    table = wedge_sign_table(m)
    M = np.zeros((n, n), dtype=complex)
    for I in np.flatnonzero(phi):
        row = table[I]
        for J in range(n):
            if row[J]:
                M[I | J, J] += row[J] * phi[I]
    return M


def top_coefficient(phi: np.ndarray) -> complex:
    """Coefficient of dx1^..^dxm (the orientation with ascending indices positive)."""
    phi = np.asarray(phi, dtype=complex)
    _infer_m_from_spinor(phi)
    return complex(phi[-1])


#: Reversal signs (-1)^{k(k-1)/2} for k mod 4.
_REVERSAL = np.array([1, 1, -1, -1], dtype=np.int64)


def transpose_form(phi: np.ndarray) -> np.ndarray:
    """Main anti-automorphism: reverse each degree-k piece, sign (-1)^{k(k-1)/2}."""
    phi = np.asarray(phi, dtype=complex)
    m = _infer_m_from_spinor(phi)
    return phi * _REVERSAL[degrees(m) % 4]


@lru_cache(maxsize=None)
def chevalley_gram(m: int) -> np.ndarray:
    """Matrix ``C`` with ``pairing(f, g) = f @ C @ g`` (bilinear, no conjugation).

    The pairing is minus the top coefficient of ``f ^ reverse(g)``; it couples
    each subset with its complement only.
    """
    m = _check_m(m)
    n = spinor_dim(m)
    table = wedge_sign_table(m)
    deg = degrees(m)
    C = np.zeros((n, n))
    full = n - 1
    for I in range(n):
        J = full ^ I
        C[I, J] = -_REVERSAL[deg[J] % 4] * table[I, J]
    C.setflags(write=False)
    return C


def chevalley_pairing(f: np.ndarray, g: np.ndarray) -> complex:
    """Bilinear spinor pairing ``-(f ^ reverse(g))_top``."""
    f = np.asarray(f, dtype=complex)
    g = np.asarray(g, dtype=complex)
    m = _infer_m_from_spinor(f)
    return complex(f @ chevalley_gram(m) @ g)


def chevalley_symmetry_sign(m: int) -> int:
    """Sign s with ``pairing(f, g) = s * pairing(g, f)``: (-1)^{m(m-1)/2}."""
    return int(_REVERSAL[_check_m(m) % 4])


@lru_cache(maxsize=None)
def wedge_matrices(m: int) -> tuple[np.ndarray, ...]:
    """Matrices of ``dx_{i+1} ^ .`` for i = 0..m-1, each ``(2**m, 2**m)``."""
    m = _check_m(m)
    n = spinor_dim(m)
    out = []
    for i in range(m):
        bit = 1 << i
        W = np.zeros((n, n))
        for I in range(n):
            if I & bit:
                continue
            sign = 1 if int(I & (bit - 1)).bit_count() % 2 == 0 else -1
            W[I | bit, I] = sign
        W.setflags(write=False)
        out.append(W)
    return tuple(out)


@lru_cache(maxsize=None)
def contraction_matrices(m: int) -> tuple[np.ndarray, ...]:
    """Matrices of contraction by ``d/dx_{i+1}`` (so ``i_X dx_j = delta_ij``)."""
    m = _check_m(m)
    n = spinor_dim(m)
    out = []
    for i in range(m):
        bit = 1 << i
        Cm = np.zeros((n, n))
        for I in range(n):
            if not I & bit:
                continue
            sign = 1 if int(I & (bit - 1)).bit_count() % 2 == 0 else -1
            Cm[I ^ bit, I] = sign
        Cm.setflags(write=False)
        out.append(Cm)
    return tuple(out)


def clifford_vector_matrix(v: np.ndarray) -> np.ndarray:
    """Clifford action of ``X + xi``: contraction by X plus wedge by xi.

    Satisfies ``cl(v) @ cl(w) + cl(w) @ cl(v) = 2 <v, w> Id`` for the
    split-signature pairing.
    """
    v = np.asarray(v, dtype=complex)
    if v.ndim != 1 or v.shape[0] % 2:
        raise ValueError(f"expected a flat vector of even length, got shape {v.shape}")
    m = _check_m(v.shape[0] // 2)
    W = wedge_matrices(m)
    C = contraction_matrices(m)
    out = np.zeros((spinor_dim(m), spinor_dim(m)), dtype=complex)
    for j in range(m):
        if v[j]:
            out += v[j] * C[j]
        if v[m + j]:
            out += v[m + j] * W[j]
    return out


def clifford_act(v: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Apply the Clifford action of ``v`` in R^{2m} to a form vector."""
    v = np.asarray(v, dtype=complex)
    phi = np.asarray(phi, dtype=complex)
    m = _infer_m_from_spinor(phi)
    if v.shape != (2 * m,):
        raise ValueError(f"vector shape {v.shape} does not match spinor dim {phi.shape}")
    W = wedge_matrices(m)
    C = contraction_matrices(m)
    out = np.zeros_like(phi)
    for j in range(m):
        if v[j]:
            out += v[j] * (C[j] @ phi)
        if v[m + j]:
            out += v[m + j] * (W[j] @ phi)
    return out


def so_residual(alpha: np.ndarray) -> float:
    """How far ``alpha`` is from the Lie algebra of the pairing: ||(P a)^T + P a||."""
    alpha = np.asarray(alpha, dtype=complex)
    m = _infer_m_from_so(alpha)
    Pa = pairing_matrix(m) @ alpha
    return float(np.linalg.norm(Pa.T + Pa))


def require_so(alpha: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Validate membership in so(m,m); returns the array, raises ValueError."""
    alpha = np.asarray(alpha, dtype=complex)
    scale = max(1.0, float(np.linalg.norm(alpha)))
    res = so_residual(alpha)
    if res > tol * scale:
        raise ValueError(f"matrix is not skew for the split pairing (residual {res:.3e})")
    return alpha


def so_from_blocks(
    m: int,
    endo: np.ndarray | None = None,
    two_form: np.ndarray | None = None,
    bivector: np.ndarray | None = None,
) -> np.ndarray:
    """Assemble ``[[A, beta], [B, -A^T]]`` from endomorphism / 2-form / bivector blocks.

    ``two_form[i, j] = B(d_i, d_j)`` and ``bivector[i, j] = beta(dx_i, dx_j)``
    must be skew; the action on ``X + xi`` is ``A X + beta xi`` plus
    ``B X - A^T xi``, i.e. ``X -> -i_X B`` and ``xi -> -i_xi beta``.
    """
    m = _check_m(m)
    alpha = np.zeros((2 * m, 2 * m), dtype=complex)
    if endo is not None:
        A = np.asarray(endo, dtype=complex)
        alpha[:m, :m] = A
        alpha[m:, m:] = -A.T
    if two_form is not None:
        B = np.asarray(two_form, dtype=complex)
        if np.linalg.norm(B + B.T) > 1e-12 * max(1.0, np.linalg.norm(B)):
            raise ValueError("two_form block must be skew-symmetric")
        alpha[m:, :m] = B
    if bivector is not None:
        b = np.asarray(bivector, dtype=complex)
        if np.linalg.norm(b + b.T) > 1e-12 * max(1.0, np.linalg.norm(b)):
            raise ValueError("bivector block must be skew-symmetric")
        alpha[:m, m:] = b
    return alpha


def so_decompose(alpha: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split an so(m,m) element into (endo, two_form, bivector) blocks."""
    alpha = require_so(alpha)
    m = _infer_m_from_so(alpha)
    return alpha[:m, :m].copy(), alpha[m:, :m].copy(), alpha[:m, m:].copy()


def so_from_pair(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """so(m,m) element ``w -> 2(<v, w> u - <u, w> v)`` built from two vectors."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    m = _check_m(u.shape[0] // 2)
    P = pairing_matrix(m)
    return 2.0 * (np.outer(u, P @ v) - np.outer(v, P @ u))


def two_form_so(two_form: np.ndarray) -> np.ndarray:
    """so(m,m) element of a 2-form: ``X + xi -> -i_X B``."""
    two_form = np.asarray(two_form, dtype=complex)
    return so_from_blocks(two_form.shape[0], two_form=two_form)


def bivector_so(bivector: np.ndarray) -> np.ndarray:
    """so(m,m) element of a bivector: ``X + xi -> -i_xi beta``."""
    bivector = np.asarray(bivector, dtype=complex)
    return so_from_blocks(bivector.shape[0], bivector=bivector)


def two_form_spinor(two_form: np.ndarray) -> np.ndarray:
    """The 2-form ``sum_{i<j} B[i,j] dx_{i+1} ^ dx_{j+1}`` as a form vector."""
    B = np.asarray(two_form, dtype=complex)
    m = _check_m(B.shape[0])
    out = np.zeros(spinor_dim(m), dtype=complex)
    for i in range(m):
        for j in range(i + 1, m):
            out[(1 << i) | (1 << j)] = B[i, j]
    return out


def random_so_element(rng: np.random.Generator, m: int, scale: float = 1.0) -> np.ndarray:
    """Draw a real so(m,m) element with entries of the given scale."""
    m = _check_m(m)
    K = rng.normal(scale=scale, size=(2 * m, 2 * m))
    K = 0.5 * (K - K.T)
    # alpha = P^{-1} K, so P alpha = K is skew by construction
    Pinv = np.zeros((2 * m, 2 * m))
    Pinv[:m, m:] = 2.0 * np.eye(m)
    Pinv[m:, :m] = 2.0 * np.eye(m)
    return (Pinv @ K).astype(complex)


def spin_lie_action(alpha: np.ndarray) -> np.ndarray:
    """Spinor representation of an so(m,m) element.

    Defined by one quarter of the commutator sum over a pairing-dual basis;
    it is the unique lift with ``[action(a), cl(v)] = cl(a @ v)`` and no
    scalar part for trace-free ``a``.
    """
    alpha = require_so(alpha)
    m = _infer_m_from_so(alpha)
    W = wedge_matrices(m)
    C = contraction_matrices(m)
    out = np.zeros((spinor_dim(m), spinor_dim(m)), dtype=complex)
    for i in range(m):
        a_vec = clifford_vector_matrix(alpha[:, i])
        a_cov = clifford_vector_matrix(alpha[:, m + i])
        out += a_vec @ W[i] - W[i] @ a_vec
        out += a_cov @ C[i] - C[i] @ a_cov
    return out / 4.0


def spin_group_exp(alpha: np.ndarray) -> np.ndarray:
    """Exponential of the spinor representation, ``expm(spin_lie_action(alpha))``."""
    return scipy.linalg.expm(spin_lie_action(alpha))


def so_exp(alpha: np.ndarray) -> np.ndarray:
    """Exponential of an so(m,m) element (an orthogonal transformation of R^{2m})."""
    return scipy.linalg.expm(require_so(alpha))
