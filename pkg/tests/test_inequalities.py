import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zoo import model
from kahler_pinch.curvature_analysis import build_HK, tensor_norm_sq
from kahler_pinch.chart import curvature_at
from kahler_pinch.inequalities import (
    FUZZERS,
    InequalityError,
    bkn_gap,
    eeb_bound_gap,
    eeb_constant,
    fuzz_kato_chain,
    fuzz_okumura,
    kato_chain_gap,
    kato_field_gap,
    kato_pointwise_gap,
    okumura_constant,
    okumura_gap,
    random_bochner_like,
    random_traceless_hermitian,
    trace_cube_constant,
    trace_cube_gap,
)
from kahler_pinch.reports import GapReport
from kahler_pinch.tensor_core import check_kahler_symmetries


# ---------------------------------------------------------------------------
# Okumura


def test_okumura_examples():
    r = okumura_gap([1.0, -1.0])
    assert (r.lhs, r.rhs, r.gap) == (0.0, 0.0, 0.0)
    r = okumura_gap([1.0, 1.0, -2.0])
    assert r.lhs == pytest.approx(6.0)
    assert r.rhs == pytest.approx(6.0)
    assert abs(r.gap) < 1e-12 and r.passed


@pytest.mark.parametrize("m", [3, 4, 7])
def test_okumura_equality_pattern(m):
    lam = np.ones(m)
    lam[-1] = -(m - 1)
    for scale in (1.0, -0.3):
        assert abs(okumura_gap(scale * lam).gap) < 1e-10 * m ** 3


def test_okumura_rejects_nonzero_sum():
    with pytest.raises(InequalityError, match="input not trace-free"):
        okumura_gap([1.0, 1.0])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=8))
def test_okumura_holds_on_centred_vectors(values):
    lam = np.array(values) - np.mean(values)
    lam -= np.mean(lam)
    if abs(lam.sum()) > 1e-12 * max(np.abs(lam).sum(), 1e-300):
        return
    r = okumura_gap(lam)
    assert r.gap >= -1e-10 * max(1.0, r.rhs)


def test_fuzz_okumura_reaches_equality():
    s = fuzz_okumura(4, 20_000, seed=7)
    assert s.passed
    assert s.extra["min_gap_near_extremal"] < 1e-10
    assert s.min_gap > -1e-12


# ---------------------------------------------------------------------------
# Kato


def test_kato_pointwise_zero_mu():
    r = kato_pointwise_gap([1.0, -1.0], np.zeros((2, 2)))
    assert r.gap == 0.0


def test_kato_pointwise_examples(rng):
    lam = np.array([2.0, -0.5, -1.5])
    mu = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    mu -= mu.mean(axis=0)
    r = kato_pointwise_gap(lam, mu)
    assert r.passed and r.gap > 0
    with pytest.raises(InequalityError, match="columns"):
        kato_pointwise_gap(lam, mu + 1.0)
    with pytest.raises(InequalityError):
        kato_pointwise_gap(lam, mu[:2])


def test_kato_chain_equality_in_two_dimensions():
    # mu = (mu1, -mu1): |mu1|^2 + 2|mu2|^2 = 3|mu1|^2 = (3/2) sum |mu|^2
    r = kato_chain_gap([0.7 - 0.2j, -0.7 + 0.2j])
    assert abs(r.gap) < 1e-15
    assert r.lhs == pytest.approx(1.5 * 2 * abs(0.7 - 0.2j) ** 2)


def test_kato_chain_rejects_nonzero_sum():
    with pytest.raises(InequalityError):
        kato_chain_gap([1.0, 1.0, -1.0])


def test_kato_chain_fuzz_min_is_zero_in_two_dimensions():
    s = fuzz_kato_chain(2, 1000, seed=3)
    assert abs(s.min_gap) < 1e-12


def test_kato_field_on_parallel_product():
    spec = model("product_cp1", a=1.0, b=2.0)
    r = kato_field_gap(spec.chart, spec.sample_points(1, seed=5)[0])
    assert r.status == "pass" and r.rung == "fd"
    assert abs(r.gap) < 1e-5


def test_kato_field_skips_without_constant_scalar_curvature():
    spec = model("perturbed_fs", m=2, eps=0.1)
    for p in spec.sample_points(5, seed=6):
        r = kato_field_gap(spec.chart, p)
        assert r.passed
        assert r.status == "skipped" or r.gap >= -1e-5


def test_kato_field_undefined_where_E_vanishes():
    with pytest.raises(InequalityError, match="Kato undefined where |C| = 0"):
        kato_field_gap(model("flat", m=2).chart, np.array([0.1, 0.2]))


# ---------------------------------------------------------------------------
# E.E.B and trace cubes


def test_eeb_bound_gap():
    e = random_traceless_hermitian(3, seed=4)
    assert eeb_bound_gap(e, np.zeros((3,) * 4)).gap == 0.0
    r = eeb_bound_gap(e, random_bochner_like(3, seed=5))
    assert r.passed and r.rhs == pytest.approx(
        eeb_constant(3) * math.sqrt(tensor_norm_sq(random_bochner_like(3, 5))) * 2.0 * np.sum(np.abs(e.entries) ** 2))


def test_constants():
    assert okumura_constant(3) == pytest.approx(1 / math.sqrt(6))
    assert okumura_constant(2) == 0.0
    assert eeb_constant(2) == pytest.approx(0.25 * math.sqrt(19 / 24))
    assert trace_cube_constant(2) == pytest.approx(2 / (8 * math.sqrt(12)))


def test_trace_cube_cases():
    hk0 = build_HK(np.zeros((2,) * 4))
    assert trace_cube_gap(hk0, "H").gap == 0.0
    pkg = curvature_at(model("product_cp1", a=1.0, b=1.0).chart, np.zeros(2))
    hk = build_HK(pkg.B)
    for which in ("H", "K"):
        r = trace_cube_gap(hk, which)
        assert r.gap >= 0
        assert r.rhs == pytest.approx(trace_cube_constant(2) * pkg.B_norm ** 3, rel=1e-10)
    with pytest.raises(InequalityError):
        trace_cube_gap(hk, "L")


def test_trace_cube_on_random_bochner_tensors():
    for seed in range(50):
        hk = build_HK(random_bochner_like(3, seed))
        assert trace_cube_gap(hk, "H").gap >= -1e-10
        assert trace_cube_gap(hk, "K").gap >= -1e-10


# ---------------------------------------------------------------------------
# BKN


def test_bkn_parallel_and_vacuous():
    spec = model("product_cp1", a=1.0, b=1.0)
    r = bkn_gap(spec.chart, spec.sample_points(1, seed=8)[0])
    assert r.passed and abs(r.gap) < 1e-5
    r = bkn_gap(model("fubini_study", m=2).chart, np.array([0.1, 0.3j]))
    assert r.status == "vacuous" and r.passed


def test_bkn_needs_einstein_chart():
    with pytest.raises(InequalityError, match="Einstein"):
        bkn_gap(model("product_cp1", a=1.0, b=2.0).chart, np.zeros(2))


# ---------------------------------------------------------------------------
# generators


@pytest.mark.parametrize("m", [2, 3, 4])
def test_generators_are_deterministic_and_valid(m):
    e1, e2 = random_traceless_hermitian(m, 11), random_traceless_hermitian(m, 11)
    np.testing.assert_array_equal(e1.entries, e2.entries)
    assert abs(np.trace(e1.entries)) < 1e-12
    b1, b2 = random_bochner_like(m, 12), random_bochner_like(m, 12)
    np.testing.assert_array_equal(b1.components, b2.components)
    assert check_kahler_symmetries(b1).passed
    np.testing.assert_allclose(np.einsum("aacd->cd", b1.components), 0, atol=1e-12)
    assert not np.array_equal(random_bochner_like(m, 13).components, b1.components)


def test_generators_need_m_at_least_two():
    with pytest.raises(InequalityError):
        random_traceless_hermitian(1, 0)
    with pytest.raises(InequalityError):
        random_bochner_like(1, 0)


@pytest.mark.parametrize("name", sorted(FUZZERS))
def test_fuzzers_are_deterministic(name):
    a = FUZZERS[name](3, 500, 99).to_dict()
    b = FUZZERS[name](3, 500, 99).to_dict()
    assert a == b
    assert a["pass"], a


def test_fuzz_worker_split_does_not_change_results(monkeypatch):
    from kahler_pinch import inequalities

    monkeypatch.setattr(inequalities, "CHUNK", 100)
    serial = fuzz_okumura(3, 1000, 5).to_dict()
    monkeypatch.setenv(inequalities.WORKERS_ENV, "4")
    assert fuzz_okumura(3, 1000, 5).to_dict() == serial


def test_gap_report_status_and_nonfinite():
    assert GapReport("x", -1e-11, 0, 0, 1e-10).status == "pass"
    assert GapReport("x", -1e-9, 0, 0, 1e-10).status == "fail"
    with pytest.raises(ValueError):
        GapReport("x", float("nan"), 0, 0, 1e-10)
