import math
import warnings

import numpy as np
import pytest
from scipy import integrate

from bellaudit import hpdensity as hp
from bellaudit.errors import ContractError, QuadratureWarning
from bellaudit.models import Direction

from conftest import xy

E1 = Direction(1.0, 0.0, 0.0)
E2 = Direction(0.0, 1.0, 0.0)
DIAG = Direction(math.sqrt(0.5), math.sqrt(0.5), 0.0)
REF = hp.reference_family(1)
PLUS = hp.reference_outcomes()


def grid_points(n=100, lo=-3.0, hi=3.0):
    # offset so the grid hits slab edges as well as interiors
    return np.linspace(lo, hi, n, endpoint=False)


def test_kappa2_examples():
    assert hp.kappa2(-2.5, -2.5, -2, -2) == 1
    assert hp.kappa2(-2.5, -2.5, -2, -1) == 0
    assert hp.kappa2(-2.5, 0.5, -2, -2) == 0


def test_kappa_examples():
    assert hp.kappa(-2.5, -2.5, -2) == 1
    assert hp.kappa(-2.5, -1.5, -2) == 0


def test_half_open_slabs():
    assert hp.in_slab(-3.0, -2) == 1
    assert hp.in_slab(-2.0, -2) == 0
    assert hp.in_slab(-2.0, -1) == 1


def test_kappa_collapse_on_grid():
    g = grid_points()
    U, V = np.meshgrid(g, g, indexing="ij")
    slabs = range(-2, 4)
    for i in slabs:
        k = hp.kappa(U, V, i)
        assert np.array_equal(k, hp.kappa2(U, V, i, i))
        assert np.array_equal(sum(hp.kappa2(U, V, i, j) for j in slabs), k)


def test_density_off_diagonal_slabs_vanish():
    spec = REF(xy(20), xy(70))
    for i in range(-2, 4):
        assert hp.density(spec, -2.5, 0.5, i) == 0.0
        assert hp.density(spec, 1.5, -0.5, i) == 0.0


def test_reference_density_value_and_slab_mass():
    spec = REF(E1, E1)
    assert hp.density(spec, -2.5, -2.5, -2) == 1.0
    mass, _ = integrate.dblquad(lambda v, u: hp.density(spec, u, v, -2), -3, -2, -3, -2)
    assert mass == pytest.approx(1.0, abs=1e-9)


def test_density_nonnegative_on_grid():
    g = grid_points()
    U, V = np.meshgrid(g, g, indexing="ij")
    for a in (E1, DIAG, xy(130)):
        spec = REF(a, xy(77))
        for i in spec.slabs:
            assert (hp.density(spec, U, V, i) >= 0).all()


def test_density_factorizes_per_slab():
    """rho(u,v) rho(u',v') == rho(u,v') rho(u',v) for every pair of grid points (rank one)."""
    g = grid_points(60)
    smooth = hp.SlabDensitySpec(1, xy(30), xy(60), lambda a, u: np.exp(a.x * u), lambda b, v: 1 + v * v * b.y)
    for spec in (REF(xy(30), xy(60)), smooth):
        U, V = np.meshgrid(g, g, indexing="ij")
        for i in spec.slabs:
            M = hp.density(spec, U, V, i)
            assert np.linalg.matrix_rank(M, tol=1e-12 * max(M.max(), 1)) <= 1
            assert np.allclose(np.outer(M[:, 7], M[11, :]), M[11, 7] * M, atol=1e-12)


@pytest.mark.parametrize("a, b, expected", [(E1, E1, 1.0), (E2, E1, 0.0), (E2, DIAG, 0.0), (DIAG, DIAG, 0.5)])
def test_marginal_examples(a, b, expected):
    assert abs(hp.marginal_i(REF(a, b), PLUS, -2) - expected) < 1e-9


def test_marginal_on_direction_grid():
    grid = [xy(t) for t in np.linspace(0, 90, 10)]
    for a in grid:
        for b in grid:
            assert abs(hp.marginal_i(REF(a, b), PLUS, -2) - abs(a.x) * abs(b.x)) < 1e-9


def test_reference_masses_sum_to_one():
    spec = REF(xy(25), xy(110))
    masses = [hp.marginal_i(spec, PLUS, i) for i in spec.slabs]
    assert sum(masses) == pytest.approx(1.0, abs=1e-12)
    assert hp.expectation(spec, PLUS) == pytest.approx(1.0, abs=1e-12)


def test_expectation_sign_pull_out():
    spec = REF(xy(25), xy(110))
    assert hp.expectation(spec, hp.constant_outcomes(1, -1)) == pytest.approx(-hp.expectation(spec, PLUS), abs=1e-15)


def test_slab_minus_two_contribution_carries_outcome_sign():
    spec = REF(xy(40), xy(10))
    base = abs(xy(40).x) * abs(xy(10).x)
    assert hp.marginal_i(spec, hp.constant_outcomes(1, 1), -2) == pytest.approx(base, abs=1e-12)
    assert hp.marginal_i(spec, hp.constant_outcomes(-1, 1), -2) == pytest.approx(-base, abs=1e-12)


def test_correlation_target():
    assert hp.correlation_target(REF(E1, DIAG)) == pytest.approx(-math.sqrt(0.5))


def test_midpoint_agrees_with_adaptive_quadrature():
    """Smooth user weights: midpoint result vs scipy's adaptive dblquad on the slab square."""
    spec = hp.SlabDensitySpec(1, xy(30), xy(60), lambda a, u: np.exp(a.x * u), lambda b, v: 1 + v * v * b.y)
    outc = hp.OutcomeFields(lambda a, u: np.where(u < -0.5, 1.0, -1.0), lambda b, v: np.ones_like(v))
    quad = hp.QuadratureConfig(cells_per_unit=256, tolerance=1e-4)
    for i in (-2, 0, 3):
        ref, _ = integrate.dblquad(
            lambda v, u: float(outc.A_fn(spec.a, np.float64(u)) * hp.density(spec, u, v, i)),
            i - 1, i, i - 1, i, epsabs=1e-12,
        )
        assert hp.marginal_i(spec, outc, i, quad) == pytest.approx(ref, abs=1e-5)


def test_coarse_quadrature_warns():
    spec = hp.SlabDensitySpec(1, E1, E1, lambda a, u: np.exp(3 * u), lambda b, v: np.exp(3 * v))
    with pytest.warns(QuadratureWarning):
        hp.marginal_i(spec, PLUS, 3, hp.QuadratureConfig(cells_per_unit=4, tolerance=1e-9))


def test_piecewise_constant_families_do_not_warn():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        hp.locality_audit(REF, PLUS, [E1, DIAG], [E2, DIAG])


def test_convergence_under_step_halving():
    spec = hp.SlabDensitySpec(1, E1, E1, lambda a, u: 1 + 0.1 * np.sin(u), lambda b, v: np.cos(v) ** 2)
    quad = hp.QuadratureConfig(cells_per_unit=64, tolerance=1e-4)
    for i in spec.slabs:
        _, change = hp._slab_integral(spec, PLUS, i, quad)
        assert change < quad.tolerance


def test_spec_validation():
    with pytest.raises(ValueError):
        hp.SlabDensitySpec(0, E1, E1, hp.reference_sigma, hp.reference_tau)
    with pytest.raises(ValueError):
        hp.SlabDensitySpec(1, E1, E1, hp.reference_sigma, hp.reference_tau, omega_hi=4.0)
    with pytest.raises(ValueError):
        hp.QuadratureConfig(cells_per_unit=3)
    with pytest.raises(ContractError):
        hp.density(REF(E1, E1), 0.0, 0.0, 4)
    with pytest.raises(ContractError):
        hp.marginal_i(REF(E1, E1), PLUS, -3)


def test_audit_reference_two_point_b_grid():
    report = hp.locality_audit(REF, PLUS, [E1], [E1, E2])
    assert report.verdict == "non_local"
    assert report.per_slab_b_dependence[-2] == pytest.approx(1.0, abs=1e-9)
    w = next(w for w in report.witnesses if w.slab == -2 and w.varied_wing == "b")
    assert w.fixed == E1 and {w.first, w.second} == {E1, E2}
    assert w.deviation == pytest.approx(1.0, abs=1e-9)
    # a single a: nothing to vary on the left
    assert all(v == 0.0 for v in report.per_slab_a_dependence.values())


def test_audit_uniform_family_is_local():
    grid = [xy(t) for t in (0, 30, 60, 90)]
    report = hp.locality_audit(hp.uniform_family(1), PLUS, grid, grid)
    assert report.verdict == "local"
    assert report.witnesses == []
    assert report.max_deviation < 1e-12
    np.testing.assert_allclose(report.normalization, 1.0, atol=1e-12)


def test_audit_symmetric_for_mirrored_families():
    grid = [xy(t) for t in (0, 20, 55, 90)]
    report = hp.locality_audit(REF, PLUS, grid, grid)
    for i in report.per_slab_b_dependence:
        assert report.per_slab_b_dependence[i] == pytest.approx(report.per_slab_a_dependence[i], abs=1e-12)


def test_audit_b_dependence_formula():
    a_grid = [xy(t) for t in (10, 35, 80)]
    b_grid = [xy(t) for t in (0, 40, 65, 90)]
    report = hp.locality_audit(REF, PLUS, a_grid, b_grid)
    b1 = [abs(b.x) for b in b_grid]
    expected = max(abs(a.x) for a in a_grid) * (max(b1) - min(b1))
    assert report.per_slab_b_dependence[-2] == pytest.approx(expected, abs=1e-9)


def test_audit_single_b_still_sweeps_a():
    grid = [xy(t) for t in (0, 45, 90)]
    report = hp.locality_audit(REF, PLUS, grid, [xy(30)])
    assert all(v == 0.0 for v in report.per_slab_b_dependence.values())
    assert report.per_slab_a_dependence[-2] > 0.5
    assert report.verdict == "non_local"


def test_audit_rejects_empty_grid():
    with pytest.raises(ContractError):
        hp.locality_audit(REF, PLUS, [], [E1])
