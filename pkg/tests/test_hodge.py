import numpy as np
import pytest

from genkahler import clifford as cl
from genkahler import fields as gf
from genkahler import hodge as gh
from genkahler import structures as gs


@pytest.fixture(scope="module")
def t2():
    pair = gs.standard_kahler_pair(2)
    return gh.TorusBackground(pair, gf.frequencies_box(2, 2))


@pytest.fixture(scope="module")
def t4():
    pair = gs.standard_kahler_pair(4)
    return gh.TorusBackground(pair, gf.frequencies_box(4, 1))


def test_block_operator_support_discipline():
    support = [(0, 0), (1, 0)]
    op = gh.BlockOperator.identity(2, 4, support)
    f = gf.FourierField(2, 4, {(0, 0): np.ones(4)})
    np.testing.assert_allclose(op.act(f)[(0, 0)], np.ones(4))
    outside = gf.FourierField(2, 4, {(0, 1): np.ones(4)})
    with pytest.raises(ValueError):
        op.act(outside)
    with pytest.raises(ValueError):
        op[(0, 1)]
    with pytest.raises(ValueError):
        gh.BlockOperator(2, 4, support, blocks={(5, 5): np.eye(4)})
    other = gh.BlockOperator.identity(2, 4, [(0, 0)])
    with pytest.raises(ValueError):
        op @ other


def test_block_operator_arithmetic():
    support = [(0,), (1,), (-1,)]
    rng = np.random.default_rng(0)
    A = gh.BlockOperator(1, 2, support, {k: rng.normal(size=(2, 2)) for k in support})
    B = gh.BlockOperator(1, 2, support, {k: rng.normal(size=(2, 2)) for k in support})
    k = (1,)
    np.testing.assert_allclose((A @ B)[k], A[k] @ B[k])
    np.testing.assert_allclose((A + 2.0 * B - A)[k], 2.0 * B[k])
    np.testing.assert_allclose((-A)[k], -A[k])


def test_gram_properties():
    rng = np.random.default_rng(1)
    for pair in (
        gs.standard_kahler_pair(2),
        gs.standard_kahler_pair(4),
        gs.random_hermitian_pair(rng, 4),
        gs.random_hermitian_pair(rng, 2),
    ):
        A = gh.l2_gram(pair)
        np.testing.assert_allclose(A, A.T, atol=1e-10 * np.linalg.norm(A))
        assert np.min(np.linalg.eigvalsh(A)) > 0


def test_l2_inner_parseval_orthogonality(t2):
    c = cl.form_vector(2, {(1,): 1.0})
    f = gf.FourierField(2, 4, {(1, 0): c})
    g = gf.FourierField(2, 4, {(0, 1): c})
    assert gh.l2_inner(f, g, t2.gram) == 0
    assert gh.l2_inner(f, f, t2.gram).real > 0


def test_l2_inner_hermitian_and_positive(t2):
    rng = np.random.default_rng(2)
    f = gf.random_field(rng, 2, 4, gf.frequencies_box(2, 1))
    g = gf.random_field(rng, 2, 4, gf.frequencies_box(2, 1))
    hfg = gh.l2_inner(f, g, t2.gram)
    hgf = gh.l2_inner(g, f, t2.gram)
    assert hgf == pytest.approx(np.conj(hfg), abs=1e-12)
    assert gh.l2_inner(f, f, t2.gram).real > 0
    assert abs(gh.l2_inner(f, f, t2.gram).imag) < 1e-12


def test_flat_plane_generator_norm(t2):
    # |exp(i omega)|^2 = 2 on the flat Kahler plane (hand-computed)
    w = gf.FourierField.constant(2, cl.form_vector(2, {(): 1.0, (1, 2): 1j}))
    assert gh.l2_inner(w, w, t2.gram).real == pytest.approx(2.0, abs=1e-13)
    assert gh.l2_norm(w, t2.gram) == pytest.approx(np.sqrt(2.0), abs=1e-13)


def test_component_shift_labels(t4):
    with pytest.raises(ValueError):
        gh.component_operator((2, 0), t4.pair, t4.support)
    with pytest.raises(ValueError):
        gh.component_operator((0, 0), t4.pair, t4.support)
    # torsion-type shifts vanish on an integrable background
    for shift in ((3, 1), (1, 3), (-3, -1), (3, 3)):
        op = gh.component_operator(shift, t4.pair, t4.support)
        assert op.coeff_norm() < 1e-10


def test_components_sum_to_derivative(t4):
    total = None
    for op in t4.components.values():
        total = op if total is None else total + op
    assert (total - t4.derivative).coeff_norm() < 1e-9


def test_zero_frequency_blocks_vanish_without_twist(t4):
    zero = (0, 0, 0, 0)
    assert np.linalg.norm(t4.derivative[zero]) == 0
    assert np.linalg.norm(t4.components["delta+"][zero]) < 1e-14


def test_adjoint_defining_property(t4):
    rng = np.random.default_rng(3)
    f = gf.random_field(rng, 4, 16, gf.frequencies_box(4, 1))
    g = gf.random_field(rng, 4, 16, gf.frequencies_box(4, 1))
    op = t4.components["delta+"]
    star = t4.adjoint(op)
    lhs = gh.l2_inner(op.act(f), g, t4.gram)
    rhs = gh.l2_inner(f, star.act(g), t4.gram)
    assert lhs == pytest.approx(rhs, abs=1e-10)
    # involutive
    assert (t4.adjoint(star) - op).coeff_norm() < 1e-10


def test_adjoint_sign_pattern(t4):
    comp = t4.components
    r_plus = (t4.adjoint(comp["delta+"]) + comp["delta_bar+"]).coeff_norm()
    r_minus = (t4.adjoint(comp["delta-"]) - comp["delta_bar-"]).coeff_norm()
    assert r_plus < 1e-9
    assert r_minus < 1e-9


def test_adjoint_sign_pattern_random_constant_pair():
    rng = np.random.default_rng(4)
    pair = gs.random_hermitian_pair(rng, 4)
    bg = gh.TorusBackground(pair, gf.frequencies_box(4, 1))
    comp = bg.components
    scale = max(1.0, comp["delta+"].coeff_norm())
    assert (bg.adjoint(comp["delta+"]) + comp["delta_bar+"]).coeff_norm() < 1e-8 * scale
    assert (bg.adjoint(comp["delta-"]) - comp["delta_bar-"]).coeff_norm() < 1e-8 * scale


def test_laplacian_identities(t4):
    lap_d = gh.laplacian(t4.derivative, t4.gram)
    laps = {name: gh.laplacian(op, t4.gram) for name, op in t4.components.items()}
    for name, lap in laps.items():
        assert (lap_d - 4.0 * lap).coeff_norm() < 1e-9, name
    zero = gh.BlockOperator(4, 16, t4.support)
    assert gh.laplacian(zero, t4.gram).coeff_norm() == 0


def test_laplacian_self_adjoint_psd_and_preserves_grading(t4):
    lap = t4.laplace
    star = t4.adjoint(lap)
    assert (star - lap).coeff_norm() < 1e-9
    L = np.linalg.cholesky(t4.gram)
    T = L.T
    Tinv = np.linalg.inv(T)
    for k in [(0, 0, 0, 0), (1, 0, 0, 0), (1, -1, 0, 1)]:
        Dp = T @ lap[k] @ Tinv
        assert np.min(np.linalg.eigvalsh(0.5 * (Dp + Dp.conj().T))) > -1e-10
    for (p, q), Ppq in t4.pair.bigrading.items():
        for k in [(1, 0, 0, 0), (0, 1, -1, 0)]:
            np.testing.assert_allclose(lap[k] @ Ppq, Ppq @ lap[k], atol=1e-9)


def test_green_inverts_laplacian_off_kernel(t4):
    rng = np.random.default_rng(5)
    raw = gf.random_field(rng, 4, 16, gf.frequencies_box(4, 1))
    rho = t4.derivative.act(raw)  # exact, hence orthogonal to harmonics
    back = t4.laplace.act(t4.green.act(rho))
    assert (back - rho).coeff_norm() < 1e-10 * max(1.0, rho.coeff_norm())
    # G commutes with the Laplacian and the grading projectors
    assert (t4.green @ t4.laplace - t4.laplace @ t4.green).coeff_norm() < 1e-9
    for (p, q), Ppq in t4.pair.bigrading.items():
        Pop = gh.BlockOperator.from_constant(4, t4.support, Ppq)
        assert (t4.green @ Pop - Pop @ t4.green).coeff_norm() < 1e-9


def test_green_same_for_all_components(t4):
    for name in ("delta-", "delta_bar+", "delta_bar-"):
        lap = gh.laplacian(t4.components[name], t4.gram)
        G = gh.green_operator(lap, t4.gram)
        assert (G - t4.green).coeff_norm() < 1e-8


def test_green_kills_harmonics(t4):
    psi = gf.FourierField.constant(4, t4.pair.canonical_generator())
    assert t4.green.act(psi).coeff_norm() < 1e-12
    assert (t4.harmonic.act(psi) - psi).coeff_norm() < 1e-12


def test_harmonic_projector_properties(t4):
    harm = t4.harmonic
    alt = gh.BlockOperator.identity(4, 16, t4.support) - t4.green @ t4.laplace
    assert (harm - alt).coeff_norm() < 1e-9
    assert (harm @ harm - harm).coeff_norm() < 1e-9
    for (p, q), Ppq in t4.pair.bigrading.items():
        Pop = gh.BlockOperator.from_constant(4, t4.support, Ppq)
        assert (harm @ Pop - Pop @ harm).coeff_norm() < 1e-9


def test_green_apply_convenience(t2):
    rng = np.random.default_rng(6)
    raw = gf.random_field(rng, 2, 4, gf.frequencies_box(2, 1))
    rho = gf.twisted_derivative(raw)
    out = gh.green_apply(rho, t2.pair)
    lap = gh.laplacian(
        gh.component_operator((1, 1), t2.pair, rho.support()), gh.l2_gram(t2.pair)
    )
    assert (lap.act(out) - rho).coeff_norm() < 1e-10
