import dataclasses
import math

import numpy as np
import pytest
import sympy as sp

from zoo import ZOO, model, zoo_id
from kahler_pinch.chart import Domain, SymbolicMetric, chart_from_symbolic, curvature_at, curvature_batch
from kahler_pinch.curvature_analysis import tensor_norm_sq
from kahler_pinch.expressions import coordinate_symbols
from kahler_pinch.models import (
    BUILDERS,
    FLAG_NAMES,
    ModelError,
    ModelSpec,
    make_model,
    projective_fold,
    validate_model,
)


def test_flat_flags():
    spec = model("flat", m=3)
    assert spec.flags["scalar_sign"] == "0"
    assert all(spec.flags[k] for k in FLAG_NAMES if k != "compact")
    assert not spec.compact


def test_fubini_study_flags():
    spec = model("fubini_study", m=2)
    f = spec.flags
    assert f["einstein"] and f["space_form"] and f["scalar_sign"] == "+"
    # dV = 2^m det g gives Vol(CP^m) = (2 pi)^m / m!
    assert spec.exact_volume == pytest.approx((2 * math.pi) ** 2 / 2)
    assert max(curvature_batch(spec.chart, spec.sample_points(10)).B_norm) < 1e-10


def test_product_flags():
    f = model("product_cp1", a=1.0, b=2.0).flags
    assert f["constant_scalar"] and not f["einstein"] and f["parallel_E"]
    assert model("product_cp1", a=1.0, b=1.0).flags["einstein"]
    assert model("product_cpm", m1=1, m2=2, a=2.0, b=3.0).flags["einstein"]


def test_complex_hyperbolic_is_negative_space_form():
    spec = model("complex_hyperbolic", m=2)
    assert spec.flags["scalar_sign"] == "-"
    b = curvature_batch(spec.chart, spec.sample_points(10))
    assert np.max(b.B_norm) < 1e-9 and np.all(b.scalar < 0)


def test_equal_product_is_not_a_space_form():
    pkg = curvature_at(model("product_cp1", a=1.0, b=1.0).chart, np.zeros(2))
    assert tensor_norm_sq(pkg.B) > 1e-4
    assert pkg.E_norm < 1e-12


def test_unperturbed_model_is_fubini_study():
    a = make_model("perturbed_fs", m=2, eps=0.0)
    b = model("fubini_study", m=2)
    pts = b.sample_points(5, seed=2)
    np.testing.assert_allclose(a.chart.metric(pts), b.chart.metric(pts), atol=1e-12, rtol=0)
    assert a.flags == b.flags


def test_perturbed_model_is_not_constant_scalar():
    spec = model("perturbed_fs", m=2, eps=0.1)
    r = curvature_batch(spec.chart, spec.sample_points(10)).scalar
    assert np.ptp(r) > 1e-3
    assert not spec.flags["constant_scalar"]


@pytest.mark.parametrize("entry", ZOO, ids=zoo_id)
def test_validation_stats_recorded(entry):
    name, params = entry
    spec = model(name, **params)
    assert spec.validation
    assert set(FLAG_NAMES) <= set(spec.flags)
    assert spec.describe()["name"] == name


def test_sample_points_are_seeded_and_inside():
    spec = model("complex_hyperbolic", m=2)
    a, b = spec.sample_points(50, seed=4), spec.sample_points(50, seed=4)
    np.testing.assert_array_equal(a, b)
    assert np.all(np.linalg.norm(a, axis=1) <= spec.sample_radius)
    assert not np.array_equal(a, spec.sample_points(50, seed=5))


def test_projective_fold_is_an_isometry():
    spec = model("product_cpm", m1=2, m2=2)
    pts = spec.sample_points(5, seed=8) * 4.0
    folded = projective_fold((2, 2))(pts)
    for blk in (folded[:, :2], folded[:, 2:]):
        assert np.all(np.sum(np.abs(blk) ** 2, axis=1) <= 2.0 + 1e-12)
    a = curvature_batch(spec.chart, pts)
    b = curvature_batch(spec.chart, folded)
    np.testing.assert_allclose(a.B_norm, b.B_norm, rtol=1e-8)
    np.testing.assert_allclose(a.scalar, b.scalar, rtol=1e-8)


def test_far_field_reference_matches_direct_evaluation():
    spec = model("perturbed_fs", m=2, eps=0.1)
    pts = np.array([[9.0, 2.0j], [0.3, 0.1j]])
    direct = curvature_batch(spec.chart, pts)
    ref = spec.invariant_norms(pts)
    np.testing.assert_allclose(ref["scalar"], direct.scalar, rtol=1e-6)
    np.testing.assert_allclose(ref["E"], direct.E_norm, atol=1e-6)


def test_parameter_errors():
    with pytest.raises(ModelError, match="positive"):
        make_model("fubini_study", m=2, scale=-1.0)
    with pytest.raises(ModelError, match="unknown model"):
        make_model("torus")
    with pytest.raises(ModelError, match="bad parameters"):
        make_model("flat", n=2)
    with pytest.raises(ModelError):
        make_model("perturbed_fs", m=2, eps=0.7)
    with pytest.raises(ModelError):
        make_model("product_cpm", m1=0, m2=2)
    assert sorted(BUILDERS) == sorted({e[0] for e in ZOO})


def test_declared_flags_are_checked():
    spec = model("product_cp1", a=1.0, b=2.0)
    lie = dataclasses.replace(spec, flags={**spec.flags, "einstein": True})
    with pytest.raises(ModelError, match="flag validation failed"):
        validate_model(lie)


def test_positivity_failure_names_the_point():
    z, zb = coordinate_symbols(1)
    phi = z[0] * zb[0] - sp.Rational(1, 2) * (z[0] * zb[0]) ** 2
    chart = chart_from_symbolic(SymbolicMetric.from_potential(phi, 1, z, zb), Domain.cube(1, 5.0))
    flags = dict(einstein=False, constant_scalar=False, space_form=False, parallel_E=False,
                 parallel_B=False, compact=False, scalar_sign="+")
    spec = ModelSpec("bad", 1, {}, chart, flags, (1,), 1.5)
    with pytest.raises(ModelError, match="not positive definite at point"):
        validate_model(spec)
