import numpy as np
import pytest

from grushinlab.coefficients import (
    CoefficientField,
    assemble_degenerate_matrix,
    audit_ellipticity,
    audit_ellipticity_arrays,
    make_decaying_perturbation,
    make_identity_field,
    strip_bound,
)
from grushinlab.geometry import GrushinParams, HalfSpacePoint, gauge_arrays

P21 = GrushinParams(2, 1.0)
P31 = GrushinParams(3, 1.0)


def unit_box_sample(p, count, seed, strip_only=False):
    rng = np.random.default_rng(seed)
    xp = rng.uniform(-1.0, 1.0, (count, p.n - 1))
    lo = 0.5 if strip_only else 0.0
    xn = rng.uniform(lo, 1.0, count)
    return xp, xn


class TestIdentityField:
    def test_constants(self):
        f = make_identity_field(P31)
        assert f.lambda_const == f.Lambda_const == 1.0
        assert 0.0 < f.delta_const < 1.0
        assert f.decay_s == np.inf

    def test_degenerate_matrix_eigenvalues(self):
        f = make_identity_field(P31)
        xn = np.array([0.0, 0.3, 1.0])
        mats = assemble_degenerate_matrix(f, np.zeros((3, 2)), xn, P31)
        for k, t in enumerate(xn):
            expect = sorted([t**2, t**2, 1.0])
            np.testing.assert_allclose(sorted(np.linalg.eigvalsh(mats[k])), expect, atol=1e-14)

    def test_audit_passes_any_epsilon(self):
        f = make_identity_field(P21)
        xp, xn = unit_box_sample(P21, 400, 1)
        for eps0 in (0.1, 0.5, 0.9):
            rep = audit_ellipticity_arrays(f, P21, eps0, xp, xn)
            assert rep.passed
            assert rep.lower_bound_formula > 0.0

    def test_worked_formula_bound(self):
        # alpha=1, eps0=1/2, delta=1/2, lambda=1, tau=3/4:
        # min{(1/4)(1/4), 1 - (4/3)(1/2)} = 1/16
        f = make_identity_field(P21)
        xp, xn = unit_box_sample(P21, 200, 2, strip_only=True)
        rep = audit_ellipticity_arrays(f, P21, 0.5, xp, xn)
        assert rep.lower_bound_formula == pytest.approx(0.0625, abs=0)
        assert rep.lower_bound_numeric >= 0.0625 - 1e-10
        assert rep.upper_bound_numeric <= 1.0 + 1e-12


class TestDecayingPerturbation:
    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            make_decaying_perturbation(P21, 0.0, 0.3, 0)
        with pytest.raises(ValueError):
            make_decaying_perturbation(P21, 2.0, 0.0, 0)
        with pytest.raises(ValueError):
            make_decaying_perturbation(P21, 2.0, 1.2, 0)

    def test_small_amplitude_limit_is_identity(self):
        f = make_decaying_perturbation(P31, 2.0, 1e-9, 5)
        xp, xn = unit_box_sample(P31, 50, 3)
        a = f.tangential(xp, xn)
        m = f.mixed(xp, xn)
        np.testing.assert_allclose(a, np.broadcast_to(np.eye(2), a.shape), atol=1e-9)
        np.testing.assert_allclose(m, np.zeros_like(m), atol=1e-9)

    def test_blocks_are_symmetric(self):
        f = make_decaying_perturbation(P31, 2.0, 0.5, 7)
        xp, xn = unit_box_sample(P31, 100, 4)
        a = f.tangential(xp, xn)
        np.testing.assert_allclose(a, np.swapaxes(a, -1, -2), atol=0)

    def test_pairwise_envelope(self):
        # |a_ij - delta_ij| + |a_in| <= d^{-s} for every pair, any amplitude <= 1
        for p in (P21, P31):
            f = make_decaying_perturbation(p, 2.0, 1.0, 11)
            rng = np.random.default_rng(6)
            xp = rng.uniform(-30.0, 30.0, (300, p.n - 1))
            xn = rng.uniform(0.0, 30.0, 300)
            env = np.minimum(1.0, gauge_arrays(xp, xn, p) ** -2.0)
            dev = np.abs(f.tangential(xp, xn) - np.eye(p.n - 1))
            mix = np.abs(f.mixed(xp, xn))
            worst = dev.max(axis=(-1, -2)) + mix.max(axis=-1)
            assert np.all(worst <= env + 1e-15)

    def test_far_field_total_deviation(self):
        # at gauge >= 10 with s=2 the summed deviation is below 1e-2
        f = make_decaying_perturbation(P31, 2.0, 0.3, 13)
        rng = np.random.default_rng(8)
        xp = rng.uniform(-500.0, 500.0, (500, 2))
        xn = rng.uniform(0.0, 40.0, 500)
        d = gauge_arrays(xp, xn, P31)
        keep = d >= 10.0
        total = np.abs(f.tangential(xp, xn) - np.eye(2)).sum(axis=(-1, -2)) + np.abs(
            f.mixed(xp, xn)
        ).sum(axis=-1)
        assert keep.any()
        assert np.all(total[keep] <= 1e-2)

    def test_mixed_condition_margin(self):
        f = make_decaying_perturbation(P31, 2.0, 0.3, 17)
        xp, xn = unit_box_sample(P31, 2000, 9)
        sup_sq = np.sum(np.max(np.abs(f.mixed(xp, xn)), axis=0) ** 2)
        assert 1.0 - sup_sq / f.lambda_const > f.delta_const

    def test_deterministic_in_seed(self):
        a = make_decaying_perturbation(P21, 2.0, 0.4, 42)
        b = make_decaying_perturbation(P21, 2.0, 0.4, 42)
        xp, xn = unit_box_sample(P21, 20, 10)
        np.testing.assert_array_equal(a.tangential(xp, xn), b.tangential(xp, xn))
        np.testing.assert_array_equal(a.mixed(xp, xn), b.mixed(xp, xn))

    def test_audit_passes_on_thousand_points(self):
        f = make_decaying_perturbation(P21, 2.0, 0.3, 42)
        xp, xn = unit_box_sample(P21, 1000, 12)
        rep = audit_ellipticity_arrays(f, P21, 0.5, xp, xn)
        assert rep.passed
        assert rep.lower_bound_numeric >= rep.lower_bound_formula - 1e-10

    def test_rayleigh_quotients_within_declared_bracket(self):
        f = make_decaying_perturbation(P31, 2.0, 0.6, 19)
        xp, xn = unit_box_sample(P31, 500, 13)
        eigs = np.linalg.eigvalsh(f.tangential(xp, xn))
        assert np.all(eigs[:, 0] >= f.lambda_const - 1e-12)
        assert np.all(eigs[:, -1] <= f.Lambda_const + 1e-12)


class TestAudit:
    def test_point_interface(self):
        f = make_identity_field(P21)
        pts = [HalfSpacePoint([0.3], 0.7), HalfSpacePoint([-0.5], 0.0), HalfSpacePoint([0.9], 0.2)]
        rep = audit_ellipticity(f, P21, 0.5, pts)
        assert rep.passed
        assert rep.total_count == 3
        assert rep.strip_count == 1

    def test_boundary_degeneracy_allowed(self):
        f = make_decaying_perturbation(P21, 2.0, 0.5, 23)
        xp = np.array([[0.4], [-0.7]])
        xn = np.zeros(2)
        rep = audit_ellipticity_arrays(f, P21, 0.5, xp, xn)
        assert rep.passed

    def test_lying_declaration_is_reported_not_raised(self):
        honest = make_identity_field(P21)
        liar = CoefficientField(
            tangential=honest.tangential,
            mixed=honest.mixed,
            lambda_const=2.0,  # identity block cannot reach this floor
            Lambda_const=2.0,
            delta_const=0.5,
            decay_s=np.inf,
        )
        xp, xn = unit_box_sample(P21, 50, 14)
        rep = audit_ellipticity_arrays(liar, P21, 0.5, xp, xn)
        assert not rep.passed
        assert any(v.kind == "rayleigh-lower" for v in rep.violations)

    def test_tau_validation(self):
        f = make_identity_field(P21)
        xp, xn = unit_box_sample(P21, 10, 15)
        with pytest.raises(ValueError):
            audit_ellipticity_arrays(f, P21, 0.5, xp, xn, tau=0.3)  # <= 1 - delta
        with pytest.raises(ValueError):
            audit_ellipticity_arrays(f, P21, 1.5, xp, xn)

    def test_sample_must_lie_in_unit_halfbox(self):
        f = make_identity_field(P21)
        with pytest.raises(ValueError):
            audit_ellipticity_arrays(f, P21, 0.5, np.array([[2.0]]), np.array([0.5]))

    def test_tau_family_reproduces_intermediate_bounds(self):
        f = make_decaying_perturbation(P21, 2.0, 0.3, 29)
        xp, xn = unit_box_sample(P21, 300, 16, strip_only=True)
        delta = f.delta_const
        for tau in (1.0 - delta + 0.05, 1.0 - delta / 2.0, 0.95):
            rep = audit_ellipticity_arrays(f, P21, 0.5, xp, xn, tau=tau)
            assert rep.lower_bound_formula == pytest.approx(
                strip_bound(f.lambda_const, delta, 0.5, P21.alpha, tau), rel=1e-15
            )
            assert rep.passed


class TestThreading:
    def test_thread_budget_env(self, monkeypatch):
        from grushinlab.runtime import thread_budget

        monkeypatch.delenv("GRUSHINLAB_THREADS", raising=False)
        assert thread_budget() == 1
        monkeypatch.setenv("GRUSHINLAB_THREADS", "4")
        assert thread_budget() == 4
        monkeypatch.setenv("GRUSHINLAB_THREADS", "0")
        assert thread_budget() == 1
        monkeypatch.setenv("GRUSHINLAB_THREADS", "nope")
        with pytest.raises(ValueError):
            thread_budget()

    def test_parallel_audit_matches_serial(self, monkeypatch):
        f = make_decaying_perturbation(P21, 2.0, 0.3, 31)
        xp, xn = unit_box_sample(P21, 512, 17)
        monkeypatch.setenv("GRUSHINLAB_THREADS", "1")
        serial = audit_ellipticity_arrays(f, P21, 0.5, xp, xn)
        monkeypatch.setenv("GRUSHINLAB_THREADS", "4")
        threaded = audit_ellipticity_arrays(f, P21, 0.5, xp, xn)
        assert serial == threaded
