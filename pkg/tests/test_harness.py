import numpy as np
import pytest

from semiconvex.fields import Box, validate_certificates
from semiconvex.jets import BlockSplit, Jet2, SymMatrix, pullback_slice
from semiconvex.argmin import solve_argmin
from semiconvex.harness import (
    block_quadratic_field,
    build_contact_quadratic,
    generate_field,
    kinked_base_field,
    quadratic_plus_cosine_field,
    random_block_quadratic,
    regularize_j,
    schur_complement,
    zero_field,
)
from semiconvex.harness.pipeline import (
    ConfigError,
    ExperimentConfig,
    grid_points,
    verify_minimum_principle,
)


def spec_positive_blocks():
    return np.eye(2), np.array([[1.0], [0.0]]), np.array([[1.0]])


def test_block_quadratic_certificates_validate():
    B, C, D = spec_positive_blocks()
    f = block_quadratic_field(B, C, D)
    rep = validate_certificates(f, segments=24, seed=1)
    assert rep.passed, rep.worst


def test_block_quadratic_schur_example():
    B, C, D = spec_positive_blocks()
    S = schur_complement(B, C, D)
    assert S == pytest.approx(np.diag([0.0, 1.0]))
    # trace reducer margin: tr(B) - |C|^2/D = 1 >= 0
    assert np.trace(S) == pytest.approx(1.0)


def test_block_quadratic_rejects_singular_fiber():
    with pytest.raises(ValueError):
        block_quadratic_field(np.eye(2), np.zeros((2, 1)), [[0.0]])


def test_random_block_quadratic_hits_prescribed_schur():
    f = random_block_quadratic(2, 1, 7, schur_eigs=[0.4, 1.1])
    assert f.sigma > 0
    # solve the argmin directly and compare marginal curvature by eigenvalues
    from semiconvex.argmin import marginal_field
    from semiconvex.jets import estimate_jet
    g = marginal_field(f, 1e-10)
    est = estimate_jet(g, np.zeros(2), 1e-3)
    eigs = np.sort(np.linalg.eigvalsh(est.jet.A.a))
    assert eigs == pytest.approx([0.4, 1.1], abs=1e-6)


def test_quadratic_plus_cosine_margin_check():
    B, C, D = spec_positive_blocks()
    f = quadratic_plus_cosine_field(B, C, D, amplitude=0.05,
                                    frequency=[1.0, 0.5, 0.5],
                                    membership_margin=0.5)
    assert f.sigma > 0
    assert validate_certificates(f, segments=16, seed=2).passed
    # amplitude * ||w||^2 = 0.075 exceeds a margin of 0.05
    with pytest.raises(ValueError):
        quadratic_plus_cosine_field(B, C, D, amplitude=0.05,
                                    frequency=[1.0, 0.5, 0.5],
                                    membership_margin=0.05)


def test_kinked_base_field_argmin():
    f = kinked_base_field()
    for x in (-0.9, 0.4):
        res = solve_argmin(f, [x], 1e-10)
        assert res.gamma[0] == pytest.approx(2 * abs(x) / 3, abs=1e-9)


def test_zero_field_certificates():
    f = zero_field()
    assert f.kappa == 0 and f.sigma == 0 and f.kappa2 == 0
    assert f.sup_bound == 0 and f.semiconcavity == 0


def test_generate_field_dispatch():
    f = generate_field("block-quadratic",
                       {"B": [[1, 0], [0, 1]], "C": [[1.0], [0.0]],
                        "D": [[1.0]]})
    assert f.dim == 3 and f.base_dim == 2
    z = generate_field("zero", {"n": 1, "m": 2})
    assert z.dim == 3
    k = generate_field("kinked-base", {})
    assert k.sigma == 3.0
    with pytest.raises(ValueError):
        generate_field("unknown", {})


def test_regularize_j_adds_fiber_quadratic():
    f = zero_field()
    f1 = regularize_j(f, 1)
    assert f1([0.3, 0.5]) == pytest.approx(0.25)  # (1/1) * |y|^2 with y=0.5
    assert f1.sigma == pytest.approx(2.0)
    assert f1.kappa2 == pytest.approx(2.0)
    with pytest.raises(ValueError):
        regularize_j(f, 0)


def test_regularize_j_certificate_arithmetic():
    B, C, D = spec_positive_blocks()
    f = block_quadratic_field(B, C, D)
    fj = regularize_j(f, 4)
    assert fj.sigma == pytest.approx(f.sigma + 0.5)
    assert fj.kappa2 == pytest.approx(f.kappa2 + 0.5)


def test_regularize_j_large_j_is_nearly_identity(rng):
    f = block_quadratic_field(*spec_positive_blocks())
    fj = regularize_j(f, 10 ** 9)
    for _ in range(10):
        z = rng.uniform(-1, 1, size=3)
        assert fj(z) == pytest.approx(f(z), abs=1e-8)


def test_marginal_monotone_in_j(rng):
    f = block_quadratic_field(*spec_positive_blocks())
    xs = [rng.uniform(-0.5, 0.5, size=2) for _ in range(5)]
    values = {}
    for j in (2, 8, 32):
        fj = regularize_j(f, j)
        values[j] = [solve_argmin(fj, x, 1e-10).g_value for x in xs]
    for a, b in zip(values[2], values[8]):
        assert a >= b - 1e-9
    for a, b in zip(values[8], values[32]):
        assert a >= b - 1e-9


def test_contact_quadratic_base_taylor_case():
    jet = Jet2(1.0, np.array([0.5]), SymMatrix([[2.0]]))
    q = build_contact_quadratic(jet, [0.0], [0.0], np.zeros((1, 1)), 0.0, 0.1)
    # fiber Hessian block is zero; base block is Hess g + eps
    assert q.jet.A.a == pytest.approx(np.array([[2.1, 0.0], [0.0, 0.0]]))
    assert q.field([0.2, 5.0]) == pytest.approx(1.0 + 0.1 + 0.5 * 2.0 * 0.04
                                                + 0.05 * 0.04)


def test_contact_quadratic_scalar_blocks():
    # n = m = 1, Gamma = [g], kappa2 = 1: [[g'' + eps + 2 g^2, -2 g], [-2 g, 2]]
    jet = Jet2(0.0, np.array([0.0]), SymMatrix([[3.0]]))
    g = 0.7
    q = build_contact_quadratic(jet, [0.0], [0.0], [[g]], 1.0, 0.2)
    expect = np.array([[3.0 + 0.2 + 2 * g * g, -2 * g], [-2 * g, 2.0]])
    assert q.jet.A.a == pytest.approx(expect)


def test_contact_quadratic_pullback_identity(rng):
    """Slice pullback of the q-jet equals Hess g + eps I to 1e-12."""
    for _ in range(50):
        n = int(rng.integers(1, 4))
        m = int(rng.integers(1, 4))
        H = rng.normal(size=(n, n))
        H = 0.5 * (H + H.T)
        jet = Jet2(float(rng.normal()), rng.normal(size=n), SymMatrix(H))
        G = rng.normal(size=(m, n))
        kappa2 = float(rng.uniform(0.0, 3.0))
        eps = float(rng.uniform(0.001, 1.0))
        q = build_contact_quadratic(jet, rng.normal(size=n),
                                    rng.normal(size=m), G, kappa2, eps)
        pulled = pullback_slice(q.jet, BlockSplit(n, m), G)
        expect = H + eps * np.eye(n)
        assert np.max(np.abs(pulled.A.a - expect)) <= 1e-12


def test_contact_quadratic_shape_errors():
    jet = Jet2(0.0, np.zeros(2), SymMatrix(np.eye(2)))
    with pytest.raises(ValueError):
        build_contact_quadratic(jet, [0.0], [0.0], np.zeros((1, 1)), 1.0, 0.1)
    with pytest.raises(ValueError):
        build_contact_quadratic(jet, [0.0, 0.0], [0.0], np.zeros((2, 2)),
                                1.0, 0.1)


def pipeline_config(family_params, sub="trace", shape=(8, 8), **kw):
    defaults = dict(
        subequation_name=sub, subequation_n=2, family="block-quadratic",
        family_parameters=family_params, grid_box=Box.cube(2, 0.5),
        grid_shape=shape, epsilons=[0.04, 0.02], j_values=[4, 8],
        stages=[(8, 0.02)], monotone_stride=16, contact_samples=4)
    defaults.update(kw)
    return ExperimentConfig(**defaults)


def test_pipeline_positive_control():
    cfg = pipeline_config({"B": [[1, 0], [0, 1]], "C": [[1.0], [0.0]],
                           "D": [[1.0]]}, min_stable_fraction=0.9)
    rep = verify_minimum_principle(cfg)
    assert rep.passed
    assert rep.violation_rate_stable == 0.0
    assert rep.monotone["j_ok"] and rep.monotone["eps_ok"]
    assert rep.constants["q_failures"] == 0
    # every stable record carries a jet and a verdict
    stable = [r for r in rep.records if r.verdict == "member"]
    assert stable and all(r.jet is not None for r in stable)


def test_pipeline_negative_control():
    cfg = pipeline_config({"B": [[0.1, 0], [0, 0.1]], "C": [[1.0], [0.0]],
                           "D": [[1.0]]})
    rep = verify_minimum_principle(cfg)
    assert not rep.passed
    assert rep.violation_rate_stable >= 0.99
    # the contact check is independent of membership and still holds
    assert rep.constants["q_failures"] == 0


def test_pipeline_zero_field():
    cfg = ExperimentConfig(
        subequation_name="P", subequation_n=1, family="zero",
        family_parameters={"n": 1, "m": 1}, grid_box=Box.cube(1, 0.5),
        grid_shape=(15,), epsilons=[0.1, 0.05], j_values=[2, 4],
        stages=[(4, 0.05)], monotone_stride=5, min_stable_fraction=0.99)
    rep = verify_minimum_principle(cfg)
    assert rep.passed
    assert rep.violation_rate_stable == 0.0
    assert rep.exception_rate == 0.0


def test_pipeline_grid_must_fit_shrunken_domain():
    cfg = pipeline_config({"B": [[1, 0], [0, 1]], "C": [[1.0], [0.0]],
                           "D": [[1.0]]},
                          grid_box=Box.cube(2, 1.9), shape=(4, 4))
    with pytest.raises(ConfigError):
        verify_minimum_principle(cfg)


def test_config_validation():
    with pytest.raises(ConfigError):
        pipeline_config({"B": [[1, 0], [0, 1]], "C": [[1.0], [0.0]],
                         "D": [[1.0]]}, epsilons=[0.02, 0.04])
    with pytest.raises(ConfigError):
        pipeline_config({"B": [[1, 0], [0, 1]], "C": [[1.0], [0.0]],
                         "D": [[1.0]]}, j_values=[8, 4])
    with pytest.raises(ConfigError):
        pipeline_config({"B": [[1, 0], [0, 1]], "C": [[1.0], [0.0]],
                         "D": [[1.0]]}, stages=[(3, 0.02)])


def test_grid_points_row_major():
    pts = grid_points(Box(np.array([0.0, 0.0]), np.array([1.0, 1.0])), (2, 3))
    assert len(pts) == 6
    assert pts[0] == pytest.approx([0.0, 0.0])
    assert pts[1] == pytest.approx([0.0, 0.5])
    assert pts[-1] == pytest.approx([1.0, 1.0])
