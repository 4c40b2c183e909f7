import math

import numpy as np
import pytest

from zoo import model
from kahler_pinch.chart import curvature_at
from kahler_pinch.pinching import (
    THEOREMS,
    P,
    PinchError,
    Q,
    constant_orderings,
    default_nodes,
    evaluate_theorem,
    model_grid,
    pinch_threshold,
    radical,
    summarize_grid,
    yamabe_einstein_positive,
)
from kahler_pinch.quadrature import (
    MAX_EXPANDED_POINTS,
    QuadratureError,
    build_grid,
    integrate,
    lp_norm,
    torus_invariant,
    volume,
)


# ---------------------------------------------------------------------------
# quadrature


def test_grid_nodes_and_validation():
    g = build_grid((2,), nodes=8)
    assert g.nodes == 8 and g.compact and g.truncation_error == 0.0
    assert len(g) == 8 * 8
    assert len(g.with_phases()) == 8 * 8 * 64
    with pytest.raises(QuadratureError):
        build_grid((1,), nodes=4)
    with pytest.raises(QuadratureError):
        build_grid((1,), compact=False)
    t = build_grid((1,), nodes=8, compact=False, trunc_radius=0.5)
    assert t.truncation_error is None and t.describe()["trunc_radius"] == 0.5


def test_phase_expansion_is_capped():
    g = build_grid((2, 2), nodes=32)
    assert len(g) * 32 ** 4 > MAX_EXPANDED_POINTS
    with pytest.raises(QuadratureError, match="torus invariant"):
        g.with_phases()


def test_flat_disc_area():
    chart = model("flat", m=1).chart
    grid = build_grid((1,), nodes=16, compact=False, trunc_radius=2.0)
    # dV = 2 dx dy on C^1 with g = 1
    assert volume(chart, grid) == pytest.approx(2 * math.pi * 4, rel=1e-12)


def test_fubini_study_curve_volume():
    spec = model("fubini_study", m=1)
    assert volume(spec.chart, model_grid(spec)) == pytest.approx(2 * math.pi, rel=1e-6)


@pytest.mark.parametrize("m", [2, 3])
def test_fubini_study_volumes(m):
    spec = model("fubini_study", m=m)
    assert volume(spec.chart, model_grid(spec)) == pytest.approx(spec.exact_volume, rel=1e-8)


def test_non_invariant_integrand_expands_phases():
    spec = model("fubini_study", m=1)
    grid = build_grid((1,), nodes=16)
    f = lambda p: 1.0 + np.real(p[:, 0]) / (1 + np.abs(p[:, 0]) ** 2)  # noqa: E731
    assert not torus_invariant(f, grid)
    # the odd part integrates to zero by symmetry
    assert integrate(spec.chart, grid, f) == pytest.approx(2 * math.pi, rel=1e-6)


def test_lp_norm_cases():
    spec = model("product_cp1", a=1.0, b=1.0)
    grid = model_grid(spec)
    assert lp_norm(spec.chart, grid, lambda p: np.zeros(len(p)), 2) == 0.0
    b0 = curvature_at(spec.chart, np.zeros(2)).B_norm
    vol = volume(spec.chart, grid)
    bfield = lambda p: spec.invariant_norms(p)["B"]  # noqa: E731
    assert lp_norm(spec.chart, grid, bfield, 2) == pytest.approx(b0 * math.sqrt(vol), rel=1e-6)
    with pytest.raises(QuadratureError):
        lp_norm(spec.chart, grid, bfield, 0.5)
    with pytest.raises(QuadratureError):
        lp_norm(spec.chart, grid, lambda p: -np.ones(len(p)), 2)


def test_lp_norm_is_monotone():
    spec = model("fubini_study", m=2)
    grid = model_grid(spec)
    f = lambda p: 1.0 / (1.0 + np.sum(np.abs(p) ** 2, axis=1))  # noqa: E731
    assert lp_norm(spec.chart, grid, f, 2) < lp_norm(spec.chart, grid, lambda p: 2 * f(p), 2)


def test_grid_outside_domain():
    from kahler_pinch.chart import ChartError

    spec = model("complex_hyperbolic", m=2)
    grid = build_grid((2,), nodes=8, compact=False, trunc_radius=0.95)
    with pytest.raises(ChartError, match="outside chart domain"):
        volume(spec.chart, grid)


def test_default_nodes():
    assert default_nodes(model("perturbed_fs", m=2, eps=0.1)) == 64
    assert default_nodes(model("fubini_study", m=2)) == 16


# ---------------------------------------------------------------------------
# constants and thresholds


def test_yamabe_examples():
    for m in range(2, 7):
        assert yamabe_einstein_positive(2 * m - 1, 1.0, m) == pytest.approx(m - 1)
    assert yamabe_einstein_positive(1.0, 16.0, 2) == pytest.approx(4.0 / 3.0)
    for bad in ((0.0, 1.0, 2), (1.0, -1.0, 2), (1.0, 1.0, 1)):
        with pytest.raises(PinchError):
            yamabe_einstein_positive(*bad)


def test_P_and_Q_tables():
    assert P(2) == 1.5
    for m in range(3, 13):
        assert P(m) == 2 * (2 * m - 1) / (m * m - 1)
    assert Q(2) == 10 / 3 and Q(3) == 4.5
    for m in range(4, 13):
        assert Q(m) == 2 * (2 * m - 1) / (m - 1)


def test_threshold_examples():
    r24 = math.sqrt(24 / 19)
    assert radical(2) == pytest.approx(r24)
    assert pinch_threshold("T3.3", 2, Lambda=1.0) == pytest.approx(1.5 * r24)
    assert pinch_threshold("T3.1", 2, Lambda=1.0) == pytest.approx(4 * 3 / 8 * r24)
    assert pinch_threshold("T4.4", 2, R=3.0) == pytest.approx(3.0 / math.sqrt(3))
    assert pinch_threshold("T4.4", 2, R=1.0) == pytest.approx(2 * math.sqrt(3) / 6)


@pytest.mark.parametrize("tid", sorted(THEOREMS))
def test_thresholds_are_increasing(tid):
    m = max(THEOREMS[tid].m_min, 4)
    key = "Lambda" if THEOREMS[tid].scale == "Lambda" else "R"
    lo = pinch_threshold(tid, m, **{key: 1.0})
    hi = pinch_threshold(tid, m, **{key: 1.5})
    assert 0 < lo < hi


def test_threshold_errors():
    with pytest.raises(PinchError, match="requires m >= 3"):
        pinch_threshold("T3.2", 2, Lambda=1.0)
    with pytest.raises(PinchError, match="requires m >= 4"):
        pinch_threshold("T4.2", 3, Lambda=1.0)
    with pytest.raises(PinchError, match="unknown theorem"):
        pinch_threshold("T5.1", 3, Lambda=1.0)
    with pytest.raises(PinchError):
        pinch_threshold("T3.3", 2)
    with pytest.raises(PinchError):
        pinch_threshold("T3.4", 2, R=-1.0)


@pytest.mark.parametrize("m", range(2, 13))
def test_constant_orderings(m):
    for name, (small, large) in constant_orderings(m).items():
        assert small < large, name


# ---------------------------------------------------------------------------
# verdicts


@pytest.fixture(scope="module")
def summaries():
    out = {}
    for key, name, params in (("fs", "fubini_study", {"m": 2}),
                              ("cp11", "product_cp1", {"a": 1.0, "b": 1.0}),
                              ("cp12", "product_cp1", {"a": 1.0, "b": 2.0})):
        spec = model(name, **params)
        out[key] = (spec, summarize_grid(spec, model_grid(spec)))
    return out


def test_fubini_study_verdicts(summaries):
    spec, summ = summaries["fs"]
    for tid in ("T4.4", "T4.3", "T3.3", "T3.4", "T4.7", "T4.8"):
        v = evaluate_theorem(tid, spec, summary=summ)
        assert v.consistency == "confirmed", (tid, v.reason)
        assert v.satisfied and v.lhs < 1e-12 and v.threshold > 0
    v = evaluate_theorem("T4.3", spec, summary=summ)
    assert v.diagnostics["yamabe"] == pytest.approx(yamabe_einstein_positive(6.0, 2 * math.pi ** 2, 2))


def test_product_verdicts(summaries):
    spec, summ = summaries["cp11"]
    v = evaluate_theorem("T4.4", spec, summary=summ)
    assert v.consistency == "violated-as-expected" and v.margin <= 0
    spec, summ = summaries["cp12"]
    v = evaluate_theorem("T3.4", spec, summary=summ)
    assert v.consistency == "violated-as-expected" and v.margin <= 0
    v = evaluate_theorem("T4.4", spec, summary=summ)
    assert v.consistency == "inconclusive" and "not Einstein" in v.reason


def test_inconclusive_paths(summaries):
    spec, summ = summaries["cp12"]
    v = evaluate_theorem("T3.3", spec, summary=summ)
    assert v.consistency == "inconclusive" and "Yamabe" in v.reason
    v = evaluate_theorem("T3.3", spec, summary=summ, Lambda=100.0)
    assert v.diagnostics["yamabe_source"] == "user-supplied"
    assert v.consistency == "paper-contradiction" and not v.passed
    v = evaluate_theorem("T3.1", spec, summary=summ)
    assert "noncompact" in v.reason


def test_truncated_noncompact_diagnostics():
    spec = model("flat", m=2)
    v = evaluate_theorem("T4.1", spec, nodes=8)
    assert v.consistency == "inconclusive" and "Yamabe" in v.reason
    v = evaluate_theorem("T4.1", spec, nodes=8, Lambda=1.0)
    assert "truncated" in v.diagnostics
    assert v.consistency == "confirmed" and v.lhs == 0.0
    v = evaluate_theorem("T3.2", model("complex_hyperbolic", m=3), nodes=8, Lambda=1.0)
    assert v.diagnostics["assumed_not_verified"]
    assert v.consistency == "confirmed"


def test_perturbed_model_is_inconclusive():
    spec = model("perturbed_fs", m=2, eps=0.1)
    v = evaluate_theorem("T3.4", spec, nodes=8)
    assert v.consistency == "inconclusive" and "not constant" in v.reason


def test_dimension_check_in_evaluation():
    with pytest.raises(PinchError, match="requires m >= 3"):
        evaluate_theorem("T3.2", model("complex_hyperbolic", m=2))
