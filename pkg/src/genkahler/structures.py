"""Pointwise generalized complex structures on R^m + (R^m)* and Hermitian pairs.

A generalized complex structure is a real matrix ``J`` on R^{2m} with
``J @ J = -Id`` that preserves the split-signature pairing.  Two commuting
structures whose product ``G = -J1 @ J2`` squares to the identity and induces
a positive metric form a Hermitian pair; the pair carries a bigrading of the
form space by joint eigenvalues and a distinguished star operator.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.linalg

from genkahler.clifford import (
    _check_m,
    clifford_vector_matrix,
    pairing_matrix,
    require_so,
    so_exp,
    so_from_pair,
    spin_lie_action,
    spinor_dim,
)

__all__ = [
    "gcs_residual",
    "require_gcs",
    "standard_complex_structure",
    "standard_symplectic_form",
    "complex_structure_gcs",
    "symplectic_gcs",
    "iso_projectors",
    "volume_spin_element",
    "canonical_generator",
    "l_frame",
    "generalized_metric",
    "metric_from_generalized",
    "hodge_star",
    "conjugate_structure",
    "HermitianPair",
    "standard_kahler_pair",
    "random_hermitian_pair",
    "solve_adjoint_factor",
]


# ---------------------------------------------------------------------------
# single structures


def gcs_residual(J: np.ndarray) -> float:
    """Deviation of ``J`` from being a pairing-orthogonal complex structure."""
    J = np.asarray(J, dtype=complex)
    m = J.shape[0] // 2
    P = pairing_matrix(m)
    eye = np.eye(2 * m)
    return float(np.linalg.norm(J @ J + eye) + np.linalg.norm(J.T @ P @ J - P))


def require_gcs(J: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    J = np.asarray(J, dtype=complex)
    if J.ndim != 2 or J.shape[0] != J.shape[1] or J.shape[0] % 2:
        raise ValueError(f"expected a 2m x 2m matrix, got {J.shape}")
    res = gcs_residual(J)
    if res > tol:
        raise ValueError(f"not a generalized complex structure (residual {res:.3e})")
    return J


def standard_complex_structure(m: int) -> np.ndarray:
    """Block-diagonal complex structure on R^m: d1 -> d2, d3 -> d4, ..."""
    m = _check_m(m)
    if m % 2:
        raise ValueError("a complex structure needs an even dimension")
    block = np.array([[0.0, -1.0], [1.0, 0.0]])
    return scipy.linalg.block_diag(*([block] * (m // 2)))


def standard_symplectic_form(m: int) -> np.ndarray:
    """Coefficients of dx1^dx2 + dx3^dx4 + ...: ``w[i,j] = w(d_i, d_j)``."""
    m = _check_m(m)
    if m % 2:
        raise ValueError("a symplectic form needs an even dimension")
    block = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return scipy.linalg.block_diag(*([block] * (m // 2)))


def complex_structure_gcs(J_base: np.ndarray) -> np.ndarray:
    """Diagonal-type structure ``[[-J, 0], [0, J^T]]`` from a base complex structure."""
    J_base = np.asarray(J_base, dtype=float)
    m = J_base.shape[0]
    if np.linalg.norm(J_base @ J_base + np.eye(m)) > 1e-9:
        raise ValueError("base matrix does not square to -Id")
    out = np.zeros((2 * m, 2 * m))
    out[:m, :m] = -J_base
    out[m:, m:] = J_base.T
    return out


def symplectic_gcs(omega: np.ndarray) -> np.ndarray:
    """Off-diagonal structure of a symplectic form, fixed so that exp(i*omega)
    spans the top level of its grading.

    ``omega[i,j] = omega(d_i, d_j)`` must be invertible and skew.
    """
    W = np.asarray(omega, dtype=float)
    m = W.shape[0]
    if np.linalg.norm(W + W.T) > 1e-12 * max(1.0, np.linalg.norm(W)):
        raise ValueError("symplectic coefficient matrix must be skew")
    out = np.zeros((2 * m, 2 * m))
    out[:m, m:] = np.linalg.inv(W)
    out[m:, :m] = -W
    return out


def iso_projectors(J: np.ndarray, tol: float = 1e-9) -> dict[int, np.ndarray]:
    """Projectors onto the eigenlevels of the spin action of ``J``.

    The spin action has spectrum ``i*k`` for ``k = -m/2 .. m/2``; the level-k
    projector is the Lagrange interpolation polynomial of the action.
    """
    J = require_gcs(J, tol=tol)
    m = J.shape[0] // 2
    if m % 2:
        raise ValueError("the eigenlevel grading needs an even dimension")
    n = m // 2
    D = spin_lie_action(J)
    eye = np.eye(spinor_dim(m), dtype=complex)
    levels = range(-n, n + 1)
    out = {}
    for k in levels:
        acc = eye
        for j in levels:
            if j != k:
                acc = acc @ (D - 1j * j * eye) / (1j * (k - j))
        out[k] = acc
    return out


def volume_spin_element(J: np.ndarray, projectors: dict[int, np.ndarray] | None = None) -> np.ndarray:
    """Spin-group element acting as ``i**k`` on the level-k space.

    Equals the spin exponential of ``(pi/2) J``.
    """
    if projectors is None:
        projectors = iso_projectors(J)
    return sum((1j**k) * Pk for k, Pk in sorted(projectors.items()))


def canonical_generator(J: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Generator of the top eigenlevel line, scaled so max|coeff| = 1.

    Deterministic: picks the largest column of the top-level projector and
    divides by its largest entry (first index on ties).
    """
    projectors = iso_projectors(J)
    n = max(projectors)
    Pn = projectors[n]
    sv = np.linalg.svd(Pn, compute_uv=False)
    if sv[0] < tol or (len(sv) > 1 and sv[1] > 0.5):
        raise ValueError("top eigenlevel is not a line")
    col = int(np.argmax(np.linalg.norm(Pn, axis=0)))
    v = Pn[:, col]
    piv = int(np.argmax(np.abs(v)))
    return v / v[piv]


def _projector_column_space(Pmat: np.ndarray, rank: int) -> np.ndarray:
    """Orthonormal basis of the column space of an idempotent of known rank."""
    U, s, _ = np.linalg.svd(Pmat)
    got = int(np.sum(s > 0.5))
    if got != rank:
        raise ValueError(f"projector rank {got} != expected {rank}")
    return U[:, :rank]


def l_frame(J: np.ndarray) -> np.ndarray:
    """Orthonormal frame (columns) of the +i eigenspace of ``J`` in C^{2m}."""
    J = require_gcs(J)
    m = J.shape[0] // 2
    proj = 0.5 * (np.eye(2 * m) - 1j * J)
    return _projector_column_space(proj, m)


def conjugate_structure(J: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Transport ``J`` by the orthogonal exponential of an so(m,m) element."""
    E = so_exp(alpha)
    return E @ np.asarray(J, dtype=complex) @ np.linalg.inv(E)


# ---------------------------------------------------------------------------
# metrics and the star operator


def generalized_metric(metric: np.ndarray, b_field: np.ndarray | None = None) -> np.ndarray:
    """Involution with +1 eigenspace ``{X + (g - b) X}`` and -1 eigenspace
    ``{X - (g + b) X}`` (covectors written via index lowering)."""
    g = np.asarray(metric, dtype=float)
    m = g.shape[0]
    b = np.zeros((m, m)) if b_field is None else np.asarray(b_field, dtype=float)
    if np.linalg.norm(g - g.T) > 1e-12 * max(1.0, np.linalg.norm(g)):
        raise ValueError("metric must be symmetric")
    if np.linalg.norm(b + b.T) > 1e-12 * max(1.0, np.linalg.norm(b)):
        raise ValueError("b-field must be skew")
    S = np.zeros((2 * m, 2 * m))
    S[:m, :m] = np.eye(m)
    S[:m, m:] = np.eye(m)
    S[m:, :m] = g - b
    S[m:, m:] = -(g + b)
    signs = np.concatenate([np.ones(m), -np.ones(m)])
    return S @ (signs[:, None] * np.linalg.inv(S))


def metric_from_generalized(G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Recover (metric, b_field) from a generalized metric's blocks."""
    G = np.asarray(G)
    m = G.shape[0] // 2
    g = np.linalg.inv(G[:m, m:].real)
    b = g @ G[:m, :m].real
    g = 0.5 * (g + g.T)
    b = 0.5 * (b - b.T)
    return g, b


def _metric_frame(metric: np.ndarray, b_field: np.ndarray | None, orientation: int) -> np.ndarray:
    """Pairing-orthonormal frame of the +1 eigenspace of the generalized metric.

    Columns ``(X_i; (g - b) X_i)`` with ``X^T g X = Id``; the vector parts are
    flipped to the requested orientation by negating the first column.
    """
    g = np.asarray(metric, dtype=float)
    m = g.shape[0]
    b = np.zeros((m, m)) if b_field is None else np.asarray(b_field, dtype=float)
    L = np.linalg.cholesky(g)  # raises LinAlgError unless positive definite
    X = np.linalg.solve(L, np.eye(m)).T  # X^T g X = Id, det(X) > 0
    if orientation not in (1, -1):
        raise ValueError("orientation must be +1 or -1")
    if orientation == -1:
        X = X.copy()
        X[:, 0] = -X[:, 0]
    return np.vstack([X, (g - b) @ X])


def hodge_star(
    metric: np.ndarray,
    b_field: np.ndarray | None = None,
    orientation: int = 1,
) -> np.ndarray:
    """Spinor star operator of a metric (+ optional b-field) and orientation.

    Minus the Clifford product of a pairing-orthonormal frame of the +1
    eigenspace of the generalized metric, last frame vector acting first.
    The result only depends on the frame through its orientation.
    """
    F = _metric_frame(metric, b_field, orientation)
    m = F.shape[1]
    M = np.eye(spinor_dim(m), dtype=complex)
    for i in range(m):
        M = clifford_vector_matrix(F[:, i]) @ M
    return -M


def _complex_orientation_sign(j: np.ndarray) -> int:
    """Orientation sign of frames ``(v1, j v1, v2, j v2, ...)`` for an
    orthogonal complex structure ``j`` on R^m, relative to the standard one."""
    j = np.asarray(j)
    m = j.shape[0]
    cols: list[np.ndarray] = []
    for i in range(m):
        if len(cols) == m:
            break
        cand = np.zeros(m)
        cand[i] = 1.0
        if cols:
            Cmat = np.column_stack(cols)
            cand = cand - Cmat @ (Cmat.T @ cand)
        nrm = np.linalg.norm(cand)
        if nrm < 1e-8:
            continue
        v = cand / nrm
        cols.append(v)
        cols.append(j @ v)
    det = np.linalg.det(np.column_stack(cols))
    return 1 if det > 0 else -1


# ---------------------------------------------------------------------------
# Hermitian pairs


class HermitianPair:
    """Two commuting generalized complex structures with positive product.

    The constructor validates every defining identity and the compatibility
    of the induced star operator with the two spin-volume elements; it raises
    ``ValueError`` when any of them fails.
    """

    def __init__(self, J1: np.ndarray, J2: np.ndarray, tol: float = 1e-9):
        J1 = require_gcs(J1, tol=tol)
        J2 = require_gcs(J2, tol=tol)
        m = J1.shape[0] // 2
        if m % 2:
            raise ValueError("Hermitian pairs need an even dimension")
        if np.linalg.norm(J1 @ J2 - J2 @ J1) > tol:
            raise ValueError("structures do not commute")
        G = -J1 @ J2
        if np.linalg.norm(G @ G - np.eye(2 * m)) > tol:
            raise ValueError("product of the pair is not an involution")
        M = pairing_matrix(m) @ G
        M = 0.5 * (M + M.T)
        if np.min(np.linalg.eigvalsh(M.real)) <= 0:
            raise ValueError("pair metric is not positive")
        self.J1 = J1.real
        self.J2 = J2.real
        self.G = G.real
        self.m = m
        self.n = m // 2
        self.tol = tol
        self.metric, self.b_field = metric_from_generalized(G)
        self._check_star()

    # -- construction helpers

    @classmethod
    def from_metric(
        cls, J1: np.ndarray, metric: np.ndarray, b_field: np.ndarray | None = None, tol: float = 1e-9
    ) -> "HermitianPair":
        G = generalized_metric(metric, b_field)
        J1 = np.asarray(J1, dtype=float)
        if np.linalg.norm(G @ J1 - J1 @ G) > tol:
            raise ValueError("structure does not commute with the metric")
        return cls(J1, G @ J1, tol=tol)

    @classmethod
    def from_kahler(cls, J_base: np.ndarray, metric: np.ndarray | None = None, tol: float = 1e-9) -> "HermitianPair":
        """Pair of a base complex structure and a compatible metric (no b-field)."""
        J_base = np.asarray(J_base, dtype=float)
        g = np.eye(J_base.shape[0]) if metric is None else np.asarray(metric, dtype=float)
        return cls.from_metric(complex_structure_gcs(J_base), g, tol=tol)

    # -- derived data

    def _check_star(self) -> None:
        F = _metric_frame(self.metric, self.b_field, 1)
        j_plus = F.T @ pairing_matrix(self.m) @ self.J1 @ F
        if np.linalg.norm(j_plus @ j_plus + np.eye(self.m)) > 1e-8:
            raise ValueError("first structure does not restrict to the +1 eigenspace")
        self.orientation = _complex_orientation_sign(j_plus.real)
        self.star = hodge_star(self.metric, self.b_field, self.orientation)
        vol = volume_spin_element(self.J1, self.proj1) @ volume_spin_element(self.J2, self.proj2)
        res = np.linalg.norm(self.star + vol)
        if res > max(self.tol, 1e-8) * np.linalg.norm(self.star):
            raise ValueError(f"star does not match the spin volume elements (residual {res:.3e})")

    @cached_property
    def proj1(self) -> dict[int, np.ndarray]:
        return iso_projectors(self.J1, tol=self.tol)

    @cached_property
    def proj2(self) -> dict[int, np.ndarray]:
        return iso_projectors(self.J2, tol=self.tol)

    @cached_property
    def bigrading(self) -> dict[tuple[int, int], np.ndarray]:
        """Joint projectors; only levels with |p|+|q| <= n and p+q = n mod 2 survive."""
        out = {}
        for p, Pp in sorted(self.proj1.items()):
            for q, Pq in sorted(self.proj2.items()):
                if abs(p) + abs(q) <= self.n and (p + q - self.n) % 2 == 0:
                    out[(p, q)] = Pp @ Pq
        return out

    def projector(self, p: int, q: int) -> np.ndarray:
        zero = np.zeros((spinor_dim(self.m), spinor_dim(self.m)), dtype=complex)
        return self.bigrading.get((p, q), zero)

    def component(self, phi: np.ndarray, p: int, q: int) -> np.ndarray:
        return self.projector(p, q) @ np.asarray(phi, dtype=complex)

    def sector_frame(self, plus: bool, holo: bool) -> np.ndarray:
        """Orthonormal frame of the rank-n intersection of the +-1 eigenspace of
        the product with the (anti)holomorphic eigenspace of the first structure."""
        eye = np.eye(2 * self.m)
        s_h = 1.0 if holo else -1.0
        s_p = 1.0 if plus else -1.0
        proj = (0.5 * (eye - 1j * s_h * self.J1)) @ (0.5 * (eye + s_p * self.G))
        return _projector_column_space(proj, self.n)

    def conjugate(self, alpha: np.ndarray) -> "HermitianPair":
        """Transport the whole pair by the exponential of an so(m,m) element."""
        E = so_exp(require_so(alpha))
        Einv = np.linalg.inv(E)
        return HermitianPair((E @ self.J1 @ Einv).real, (E @ self.J2 @ Einv).real, tol=self.tol)

    def canonical_generator(self, which: int = 2) -> np.ndarray:
        return canonical_generator(self.J2 if which == 2 else self.J1)


def standard_kahler_pair(m: int) -> HermitianPair:
    """Flat pair: standard complex structure, identity metric, no b-field."""
    return HermitianPair.from_kahler(standard_complex_structure(m))


def random_hermitian_pair(rng: np.random.Generator, m: int, b_scale: float = 1.0) -> HermitianPair:
    """Draw a pair from a random metric, b-field and two orthogonal complex
    structures on the +-1 eigenspaces of the generalized metric."""
    m = _check_m(m)
    if m % 2:
        raise ValueError("Hermitian pairs need an even dimension")
    A = rng.normal(size=(m, m))
    g = A @ A.T + 0.5 * np.eye(m)
    b = rng.normal(scale=b_scale, size=(m, m))
    b = b - b.T
    G = generalized_metric(g, b)
    P = pairing_matrix(m)

    # pairing-orthonormal frames of both eigenspaces
    Lch = np.linalg.cholesky(g)
    X = np.linalg.solve(Lch, np.eye(m)).T
    F_plus = np.vstack([X, (g - b) @ X])
    F_minus = np.vstack([X, -(g + b) @ X])

    def random_orthogonal_complex_structure() -> np.ndarray:
        Q, R = np.linalg.qr(rng.normal(size=(m, m)))
        Q = Q * np.sign(np.diag(R))
        K = scipy.linalg.block_diag(*([np.array([[0.0, -1.0], [1.0, 0.0]])] * (m // 2)))
        return Q @ K @ Q.T

    j_p = random_orthogonal_complex_structure()
    j_m = random_orthogonal_complex_structure()
    J1 = F_plus @ j_p @ F_plus.T @ P - F_minus @ j_m @ F_minus.T @ P
    return HermitianPair(J1, G @ J1)


# ---------------------------------------------------------------------------
# recovering an orbit parameter


def solve_adjoint_factor(
    J_ref: np.ndarray,
    J_target: np.ndarray,
    tol: float = 1e-11,
    max_iter: int = 50,
) -> np.ndarray:
    """Find a real so(m,m) element conjugating ``J_ref`` into ``J_target``.

    The unknown is constrained to the real span of pair-products of the
    +i-eigenframe of ``J_ref`` and their conjugates (the complement of the
    stabilizer directions), which makes the solution locally unique.  Damped
    Gauss-Newton; raises ``RuntimeError`` when it fails to reach ``tol``.
    """
    J_ref = require_gcs(J_ref)
    J_target = require_gcs(J_target)
    m = J_ref.shape[0] // 2
    lf = l_frame(J_ref)
    basis = []
    for a in range(m):
        for b in range(a + 1, m):
            alpha = so_from_pair(lf[:, a], lf[:, b])
            basis.append((alpha + alpha.conj()).real)
            basis.append((1j * (alpha - alpha.conj())).real)
    dim = len(basis)

    def assemble(c: np.ndarray) -> np.ndarray:
        A = np.zeros((2 * m, 2 * m))
        for ci, Bi in zip(c, basis):
            A += ci * Bi
        return A

    def residual(c: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        A = assemble(c)
        F = scipy.linalg.expm(A)
        Finv = scipy.linalg.expm(-A)
        R = F @ J_ref.real @ Finv - J_target.real
        return R, F, Finv

    c = np.zeros(dim)
    R, F, Finv = residual(c)
    res = np.linalg.norm(R)
    for _ in range(max_iter):
        if res < tol:
            return assemble(c)
        A = assemble(c)
        JFinv = J_ref.real @ Finv
        FJFinv = F @ JFinv
        cols = np.empty((4 * m * m, dim))
        for i, Bi in enumerate(basis):
            Li = scipy.linalg.expm_frechet(A, Bi, compute_expm=False)
            dR = Li @ JFinv - FJFinv @ (Li @ Finv)
            cols[:, i] = dR.ravel()
        step, *_ = np.linalg.lstsq(cols, -R.ravel(), rcond=None)
        scale = 1.0
        for _ in range(25):
            R_new, F_new, Finv_new = residual(c + scale * step)
            if np.linalg.norm(R_new) < res:
                break
            scale *= 0.5
        else:
            raise RuntimeError(f"no descent step found (residual {res:.3e})")
        c = c + scale * step
        R, F, Finv = residual(c)
        res = np.linalg.norm(R)
    if res < tol:
        return assemble(c)
    raise RuntimeError(f"did not converge to {tol:.1e} (residual {res:.3e})")
