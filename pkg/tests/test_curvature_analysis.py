import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zoo import model
from kahler_pinch.chart import curvature_at
from kahler_pinch.curvature_analysis import (
    bochner_components,
    bochner_from_E,
    bochner_from_ricci,
    build_HK,
    build_V_and_decompose,
    eeb_contraction,
    inner,
    matrix_norm_sq,
    tensor_norm_sq,
    v_components,
    v_norm_formulas,
    weitzenbock_residual_B,
    weitzenbock_residual_E,
)
from kahler_pinch.inequalities import (
    bochner_like_batch,
    eeb_constant,
    kahler_symmetrize,
    random_bochner_like,
    random_traceless_hermitian,
    traceless_hermitian_batch,
)
from kahler_pinch.tensor_core import (
    KAHLER_PATTERN,
    ComplexTensor,
    IndexSignature,
    TensorError,
    check_kahler_symmetries,
)


def loop_V(e):
    m = e.shape[0]
    v = np.zeros((m,) * 4, dtype=complex)
    for a, b, c, d in itertools.product(range(m), repeat=4):
        v[a, b, c, d] = -(e[a, b] * e[c, d] + e[a, d] * e[c, b])
    return v


def loop_norm(t):
    return 4.0 * sum(abs(x) ** 2 for x in t.ravel())


def loop_eeb(e, b):
    m = e.shape[0]
    return sum(e[a, bb] * e[l, c] * b[c, a, bb, l]
               for a, bb, l, c in itertools.product(range(m), repeat=4))


def random_kahler_data(m, rng):
    t = kahler_symmetrize(rng.standard_normal((m,) * 4) + 1j * rng.standard_normal((m,) * 4))
    ric = -np.einsum("aacd->cd", t)
    return t, ric, float(np.real(np.trace(ric)))


# ---------------------------------------------------------------------------
# Bochner tensor


@pytest.mark.parametrize("m", [2, 3, 4])
def test_bochner_routes_agree_on_random_data(m, rng):
    for _ in range(5):
        rm, ric, s = random_kahler_data(m, rng)
        a = bochner_components(rm, ric, s, route="E")
        b = bochner_components(rm, ric, s, route="ricci")
        assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(rm))


@pytest.mark.parametrize("m", [2, 3])
def test_bochner_is_trace_free_with_kahler_symmetries(m, rng):
    rm, ric, s = random_kahler_data(m, rng)
    b = bochner_components(rm, ric, s)
    np.testing.assert_allclose(np.einsum("aacd->cd", b), 0, atol=1e-12)
    np.testing.assert_allclose(np.einsum("abcc->ab", b), 0, atol=1e-12)
    assert check_kahler_symmetries(ComplexTensor(IndexSignature(KAHLER_PATTERN, m), b)).passed


def test_bochner_rejects_unknown_route():
    with pytest.raises(ValueError):
        bochner_components(np.zeros((2,) * 4), np.zeros((2, 2)), 0.0, route="weyl")


def test_bochner_on_models():
    flat = curvature_at(model("flat", m=2).chart, np.array([0.1, 0.2j]))
    assert np.all(bochner_from_E(flat).components == 0)
    fs = curvature_at(model("fubini_study", m=3).chart, np.zeros(3))
    assert np.max(np.abs(bochner_from_ricci(fs).components)) < 1e-10
    prod = curvature_at(model("product_cp1", a=1.0, b=1.0).chart, np.zeros(2))
    b1, b2 = bochner_from_E(prod), bochner_from_ricci(prod)
    assert np.max(np.abs(b1.components - b2.components)) < 1e-10
    assert tensor_norm_sq(b1) == pytest.approx(32.0 / 3.0, rel=1e-12)


# ---------------------------------------------------------------------------
# V-tensor


def test_v_tensor_matches_loop_definition(rng):
    e = traceless_hermitian_batch(3, 1, rng)[0]
    np.testing.assert_allclose(v_components(e)["V"], loop_V(e), atol=1e-14)


def test_v_decomposition_of_zero():
    d = build_V_and_decompose(np.zeros((3, 3)))
    assert all(v == 0.0 for v in d.norms.values())
    assert d.Kscalar == 0.0


def test_v3_norm_for_diagonal_example():
    e = np.diag([1.0, -1.0])
    d = build_V_and_decompose(e, m=2)
    f = v_norm_formulas(e)
    assert f["Z"] == pytest.approx(2.0)
    assert f["E_norm_sq"] == pytest.approx(4.0)
    # |V3|^2 / 4 = |E|^4 / (2 m (m + 1)) = 16 / 12
    assert d.norms["V3"] == pytest.approx(16.0 / 3.0, rel=1e-14)
    assert loop_norm(d.V3.components) == pytest.approx(16.0 / 3.0, rel=1e-14)
    assert d.Kscalar == pytest.approx(2.0)


@pytest.mark.parametrize("m", [2, 3, 4])
def test_v_norm_formulas_match_direct_norms(m):
    e = random_traceless_hermitian(m, seed=m).entries
    d = build_V_and_decompose(e)
    f = v_norm_formulas(e)
    for key in ("V", "V2", "V3"):
        assert d.norms[key] == pytest.approx(f[key], rel=1e-12)
        assert loop_norm(getattr(d, key).components) == pytest.approx(d.norms[key], rel=1e-12)
    assert d.norms["V1"] <= f["V1_bound"] * (1 + 1e-12)
    res = d.residuals()
    scale = d.norms["V"]
    assert res["sum"] < 1e-12 * np.sqrt(scale)
    assert max(res["ip12"], res["ip13"], res["ip23"], res["pythagoras"]) < 1e-10 * scale


def test_v_decomposition_trace_of_VE():
    e = random_traceless_hermitian(3, seed=9).entries
    d = build_V_and_decompose(e)
    # V^E is trace free and K = |E|^2 / 2
    assert abs(np.trace(d.VE.entries)) < 1e-12
    assert d.Kscalar == pytest.approx(matrix_norm_sq(e) / 2)


def test_v_decomposition_rejects_bad_input():
    with pytest.raises(TensorError, match="trace-free"):
        build_V_and_decompose(np.diag([1.0, 0.5]))
    with pytest.raises(TensorError):
        build_V_and_decompose(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(TensorError):
        build_V_and_decompose(np.diag([1.0, -1.0]), m=3)


@settings(max_examples=30, deadline=None)
@given(m=st.integers(2, 4), seed=st.integers(0, 2**32 - 1))
def test_bochner_pairing_with_V(m, seed):
    e = random_traceless_hermitian(m, seed).entries
    b = random_bochner_like(m, seed + 1).components
    parts = v_components(e)
    assert abs(inner(b, parts["V"]) - inner(b, parts["V1"])) < 1e-10 * np.sqrt(tensor_norm_sq(parts["V"]))
    # with the sign conventions used here <B, V> = -8 EEB
    assert abs(inner(b, parts["V"]) + 8 * eeb_contraction(e, b)) < 1e-10


# ---------------------------------------------------------------------------
# E.E.B


def test_eeb_matches_loop_and_bound():
    e = random_traceless_hermitian(2, seed=21).entries
    b = random_bochner_like(2, seed=22).components
    val = eeb_contraction(e, b)
    assert val == pytest.approx(loop_eeb(e, b).real, abs=1e-14)
    assert eeb_constant(2) == pytest.approx(0.25 * np.sqrt(19 / 24), rel=1e-15)
    assert abs(val) <= eeb_constant(2) * np.sqrt(tensor_norm_sq(b)) * matrix_norm_sq(e)


def test_eeb_trivial_cases():
    b = random_bochner_like(3, seed=1).components
    assert eeb_contraction(np.zeros((3, 3)), b) == 0.0
    assert eeb_contraction(random_traceless_hermitian(3, 2).entries, np.zeros((3,) * 4)) == 0.0
    fs = curvature_at(model("fubini_study", m=2).chart, np.array([0.3, 0.1j]))
    assert abs(eeb_contraction(fs.E, fs.B)) < 1e-12


def test_eeb_rejects_non_hermitian_input():
    e = np.diag([1.0, -1.0]).astype(complex)
    b = np.zeros((2,) * 4, dtype=complex)
    b[1, 0, 0, 1] = 1j
    with pytest.raises(TensorError, match="contraction not real"):
        eeb_contraction(e, b)


# ---------------------------------------------------------------------------
# H and K


def test_hk_flattening_is_row_major():
    b = random_bochner_like(2, seed=3).components
    hk = build_HK(b)
    m = 2
    for a, bb, c, d in itertools.product(range(m), repeat=4):
        assert hk.H.entries[a * m + bb, c * m + d] == -b[a, c, bb, d]
        assert hk.K.entries[a * m + bb, c * m + d] == -b[a, bb, d, c]
    assert hk.m == 2


def test_hk_of_zero():
    hk = build_HK(np.zeros((2,) * 4))
    assert all(v == 0.0 for v in hk.traces.values())


@pytest.mark.parametrize("m", [2, 3])
def test_hk_traces_on_random_bochner_tensors(m):
    for b in bochner_like_batch(m, 5, np.random.default_rng(m)):
        hk = build_HK(b)
        assert abs(hk.traces["trH"]) < 1e-10 and abs(hk.traces["trK"]) < 1e-10
        quarter = tensor_norm_sq(b) / 4
        assert hk.traces["trH2"] == pytest.approx(quarter, rel=1e-10)
        assert hk.traces["trK2"] == pytest.approx(quarter, rel=1e-10)


def test_hk_on_product_of_spheres():
    pkg = curvature_at(model("product_cp1", a=1.0, b=1.0).chart, np.array([0.2, -0.4j]))
    hk = build_HK(pkg.B)
    quarter = tensor_norm_sq(pkg.B) / 4
    assert hk.traces["trH2"] == pytest.approx(quarter, rel=1e-10)
    assert hk.traces["trK2"] == pytest.approx(quarter, rel=1e-10)


def test_hk_rejects_broken_symmetry():
    b = np.zeros((2,) * 4, dtype=complex)
    b[0, 1, 0, 0] = 1.0
    with pytest.raises(TensorError, match="symmetries"):
        build_HK(b)


# ---------------------------------------------------------------------------
# Weitzenböck residuals


def test_weitzenbock_E_on_parallel_models():
    fs = curvature_at(model("fubini_study", m=2).chart, np.array([0.2, 0.5j]))
    assert abs(weitzenbock_residual_E(fs, parallel_E=True)) < 1e-12
    spec = model("product_cp1", a=1.0, b=2.0)
    for p in spec.sample_points(5, seed=31):
        pkg = curvature_at(spec.chart, p)
        assert abs(weitzenbock_residual_E(pkg, spec.flags["parallel_E"])) < 1e-8 * (1 + pkg.E_norm ** 3)
    eq = curvature_at(model("product_cp1", a=1.0, b=1.0).chart, np.zeros(2))
    assert abs(weitzenbock_residual_E(eq, parallel_E=True)) < 1e-12


def test_weitzenbock_E_refuses_non_parallel_models():
    spec = model("perturbed_fs", m=2, eps=0.1)
    pkg = curvature_at(spec.chart, np.array([0.5, 0.2j]))
    with pytest.raises(TensorError):
        weitzenbock_residual_E(pkg, spec.flags["parallel_E"])


@pytest.mark.parametrize("name, params", [("fubini_study", {"m": 2}),
                                          ("product_cp1", {"a": 1.0, "b": 1.0}),
                                          ("product_cpm", {"m1": 2, "m2": 2})])
def test_weitzenbock_B_on_einstein_models(name, params):
    spec = model(name, **params)
    for p in spec.sample_points(3, seed=32):
        pkg = curvature_at(spec.chart, p)
        assert abs(weitzenbock_residual_B(pkg)) < 1e-8 * (1 + pkg.B_norm ** 3)


def test_weitzenbock_B_refuses_non_einstein():
    pkg = curvature_at(model("product_cp1", a=1.0, b=2.0).chart, np.zeros(2))
    with pytest.raises(TensorError, match="Einstein"):
        weitzenbock_residual_B(pkg)
