import numpy as np
import pytest

from semiconvex.fields import (
    Box,
    CertificateError,
    ScalarField,
    numerical_gradient,
    validate_certificates,
)

from conftest import coupled_quadratic


def test_box_basic():
    box = Box(np.array([-1.0, 0.0]), np.array([1.0, 2.0]))
    assert box.dim == 2
    assert box.contains([0.0, 1.0])
    assert not box.contains([0.0, 2.5])
    assert not box.contains([0.99, 1.0], margin=0.05)
    assert np.allclose(box.center, [0.0, 1.0])


def test_box_rejects_degenerate():
    with pytest.raises(ValueError):
        Box(np.array([0.0]), np.array([0.0]))


def test_field_dimension_checks():
    with pytest.raises(ValueError):
        ScalarField(dim=2, box=Box.cube(3, 1.0), fn=lambda z: 0.0)
    with pytest.raises(ValueError):
        ScalarField(dim=2, box=Box.cube(2, 1.0), fn=lambda z: 0.0, base_dim=2)
    with pytest.raises(ValueError):
        ScalarField(dim=2, box=Box.cube(2, 1.0), fn=lambda z: 0.0, kappa=-1.0)


def test_numerical_gradient_quadratic_exact():
    Q = np.array([[2.0, 0.5], [0.5, 1.0]])
    fn = lambda z: 0.5 * float(z @ Q @ z)
    p = np.array([0.7, -0.3])
    assert np.allclose(numerical_gradient(fn, p), Q @ p, atol=1e-9)


def test_field_gradient_prefers_analytic():
    called = []

    def grad(z):
        called.append(1)
        return 2.0 * z

    f = ScalarField(dim=1, box=Box.cube(1, 1.0), fn=lambda z: float(z @ z),
                    grad=grad)
    assert f.gradient([0.25]) == pytest.approx([0.5])
    assert called


def test_certificates_validate_on_honest_field():
    f = coupled_quadratic(1.0)
    rep = validate_certificates(f, segments=24, seed=3)
    assert rep.passed
    assert "joint_convexity" in rep.checked
    assert "fiber_strong_convexity" in rep.checked


def test_certificates_flag_wrong_sigma():
    # claim much more fiber strong convexity than the field has
    f = coupled_quadratic(0.5).with_certificates(sigma=5.0)
    rep = validate_certificates(f, segments=24, seed=3)
    assert not rep.passed
    with pytest.raises(CertificateError):
        validate_certificates(f, segments=24, seed=3, raise_on_failure=True)


def test_certificates_flag_wrong_kappa2():
    f = coupled_quadratic(1.0).with_certificates(kappa2=0.5)  # true value is 2
    rep = validate_certificates(f, segments=24, seed=5)
    assert not rep.passed


def test_sup_bound_check():
    f = ScalarField(dim=1, box=Box.cube(1, 2.0), fn=lambda z: float(z[0] ** 2),
                    sup_bound=4.0)
    assert validate_certificates(f, segments=8, seed=0).passed
    bad = f.with_certificates(sup_bound=1.0)
    assert not validate_certificates(bad, segments=8, seed=0).passed


def test_split_point_and_boxes():
    f = coupled_quadratic(1.0)
    x, y = f.split_point([3.0, -1.0])
    assert x == pytest.approx([3.0]) and y == pytest.approx([-1.0])
    assert f.base_box().dim == 1 and f.fiber_box().dim == 1
    assert f.fiber_dim == 1
