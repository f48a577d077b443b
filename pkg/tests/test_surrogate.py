import json
import math

import numpy as np
import pytest

from drcc import conic, moments, schedules, supports, surrogate


def identity_spec(dim, alpha, offset=0.0):
    return surrogate.ChanceSpec(np.eye(dim), offset, alpha)


def pinned_cov(n, alpha, kappa=1.0, phi=0.0):
    return schedules.ScheduleResult("cov", n, alpha, 3.0, True, kappa, phi, None)


def pinned_mean(n, alpha, nu=0.0, phi=0.0):
    return schedules.ScheduleResult("mean", n, alpha, 1.0, True, None, phi, nu)


def full_state(samples):
    state = moments.MomentState(np.asarray(samples).shape[1])
    state.update_many(np.asarray(samples, dtype=float))
    return state


def diag_state(samples):
    state = moments.MomentState(np.asarray(samples).shape[1], mode="diagonal")
    state.update_many(np.asarray(samples, dtype=float))
    return state


class TestChanceSpec:
    def test_fields(self):
        spec = surrogate.ChanceSpec([[1.0, 0.0], [0.0, 1.0]], -0.5, 0.2)
        assert spec.random_dim == 2
        assert spec.decision_dim == 2
        assert spec.offset == -0.5

    def test_rectangular_map(self):
        spec = surrogate.ChanceSpec([[1.0, 0.0, 2.0]], 0.0, 0.1)
        assert spec.random_dim == 1
        assert spec.decision_dim == 3

    def test_alpha_validation(self):
        with pytest.raises(ValueError):
            surrogate.ChanceSpec(np.eye(2), 0.0, 0.0)
        with pytest.raises(ValueError):
            surrogate.ChanceSpec(np.eye(2), 0.0, 1.0)

    def test_finite_map_required(self):
        with pytest.raises(ValueError):
            surrogate.ChanceSpec([[np.inf]], 0.0, 0.1)


class TestKnownMoments:
    def test_scalar_half_alpha(self):
        # constant is exactly 1 at alpha = 0.5: margin(x) = -x + |x|
        blocks = surrogate.build_known([-1.0], [[1.0]], identity_spec(1, 0.5))
        for x in (0.5, 2.0):
            assert surrogate.constraint_margin(blocks, [x]) == pytest.approx(0.0, abs=1e-12)
        assert surrogate.constraint_margin(blocks, [-1.0]) == pytest.approx(2.0)

    def test_zero_covariance_is_linear(self):
        blocks = surrogate.build_known([-1.0, 2.0], np.zeros((2, 2)),
                                       identity_spec(2, 0.2, offset=0.3))
        x = np.array([1.5, 0.25])
        assert surrogate.constraint_margin(blocks, x) == pytest.approx(
            -1.5 + 0.5 + 0.3, rel=1e-12
        )

    def test_margin_matches_closed_form(self):
        rng = np.random.default_rng(41)
        for _ in range(20):
            dim = int(rng.integers(1, 5))
            mu = rng.normal(size=dim)
            root = rng.normal(size=(dim, dim))
            sigma = root @ root.T
            alpha = float(rng.uniform(0.05, 0.5))
            offset = float(rng.normal())
            mat = rng.normal(size=(dim, dim))
            spec = surrogate.ChanceSpec(mat, offset, alpha)
            blocks = surrogate.build_known(mu, sigma, spec)
            for _ in range(25):
                x = rng.normal(size=dim)
                z = mat @ x
                expected = (
                    mu @ z
                    + offset
                    + math.sqrt((1.0 - alpha) / alpha) * math.sqrt(z @ sigma @ z)
                )
                assert surrogate.constraint_margin(blocks, x) == pytest.approx(
                    expected, rel=1e-9, abs=1e-9
                )

    def test_rejects_indefinite_covariance(self):
        with pytest.raises(ValueError):
            surrogate.build_known([0.0], [[-1.0]], identity_spec(1, 0.2))

    def test_solver_agrees_with_margin(self):
        # maximize x1 + x2 inside the cone cut; solution sits on the boundary
        spec = identity_spec(2, 0.2)
        blocks = surrogate.build_known([-1.0, -1.0], 0.1 * np.eye(2), spec)
        prog = surrogate.assemble_program(
            blocks, [1.0, 1.0], sense="max",
            extra_rows=[([1.0, 1.0], "<=", 10.0)],
            lower_bounds=[0.0, 0.0],
        )
        sol = conic.solve(prog)
        assert sol.status == conic.OPTIMAL
        x = sol.x[:2]
        assert surrogate.constraint_margin(blocks, x) <= 1e-6
        grid = [(a, b) for a in np.linspace(0, 10, 101) for b in np.linspace(0, 10, 101)
                if a + b <= 10.0]
        best = max(a + b for a, b in grid
                   if surrogate.constraint_margin(blocks, [a, b]) <= 1e-9)
        assert sol.objective >= best - 0.2


class TestPlugin:
    def test_two_sample_scalar(self):
        state = full_state([[0.0], [2.0]])
        blocks = surrogate.build_plugin(state, identity_spec(1, 0.5))
        # sample mean 1, sample variance 1: margin(x) = x + |x|
        assert surrogate.constraint_margin(blocks, [1.0]) == pytest.approx(2.0)
        assert surrogate.constraint_margin(blocks, [-3.0]) == pytest.approx(0.0, abs=1e-12)

    def test_single_sample_linear(self):
        state = full_state([[4.0, -2.0]])
        blocks = surrogate.build_plugin(state, identity_spec(2, 0.3))
        x = np.array([0.5, 1.0])
        assert surrogate.constraint_margin(blocks, x) == pytest.approx(2.0 - 2.0, abs=1e-12)

    def test_requires_full_mode(self):
        state = diag_state([[1.0], [2.0]])
        with pytest.raises(ValueError):
            surrogate.build_plugin(state, identity_spec(1, 0.2))

    def test_empty_state_rejected(self):
        with pytest.raises(ValueError):
            surrogate.build_plugin(moments.MomentState(1), identity_spec(1, 0.2))


def random_cov_instance(rng, dim, support_kind):
    samples = rng.normal(size=(200, dim)) * 0.4 + rng.normal(size=dim)
    state = full_state(samples)
    if support_kind == "box":
        lo = samples.min(axis=0) - 0.5
        hi = samples.max(axis=0) + 0.5
        support = supports.Box(lo, hi)
    elif support_kind == "polytope":
        support = supports.Polytope(rng.normal(size=(dim + 4, dim)) * 3.0)
    else:
        root = rng.normal(size=(dim, dim))
        support = supports.Ellipsoid(rng.normal(size=dim),
                                     root @ root.T + 0.5 * np.eye(dim))
    mat = rng.normal(size=(dim, dim))
    spec = surrogate.ChanceSpec(mat, float(rng.normal()), float(rng.uniform(0.05, 0.4)))
    return state, support, spec


class TestRobustBuilder:
    def test_margin_matches_displayed_form(self):
        rng = np.random.default_rng(42)
        for kind in ("box", "polytope", "ellipsoid"):
            state, support, spec = random_cov_instance(rng, 3, kind)
            sched = schedules.schedule_cov_auto(200, spec.alpha)
            assert sched.feasible
            blocks = surrogate.build_robust(state, support, spec, sched)
            est = state.extract()
            const = math.sqrt((1.0 - spec.alpha) / spec.alpha)
            for _ in range(50):
                x = rng.normal(size=3)
                z = spec.map @ x
                r = support.radius(z)
                expected = (
                    est.mean @ z
                    + spec.offset
                    + sched.phi * r
                    + sched.kappa * const
                    * math.sqrt(z @ est.covariance @ z + 2.0 * sched.phi * r * r)
                )
                assert surrogate.constraint_margin(blocks, x) == pytest.approx(
                    expected, rel=1e-9, abs=1e-9
                )

    def test_zero_point_zero_offset(self):
        rng = np.random.default_rng(43)
        state, support, _ = random_cov_instance(rng, 2, "box")
        spec = identity_spec(2, 0.2)
        sched = schedules.schedule_cov_auto(200, 0.2)
        blocks = surrogate.build_robust(state, support, spec, sched)
        assert surrogate.constraint_margin(blocks, np.zeros(2)) == pytest.approx(0.0, abs=1e-12)

    def test_tighter_than_plugin_everywhere(self):
        rng = np.random.default_rng(44)
        for kind in ("box", "ellipsoid"):
            state, support, spec = random_cov_instance(rng, 3, kind)
            sched = schedules.schedule_cov_auto(200, spec.alpha)
            robust = surrogate.build_robust(state, support, spec, sched)
            plugin = surrogate.build_plugin(state, spec)
            for _ in range(2000):
                x = rng.normal(size=3) * 3.0
                assert (
                    surrogate.constraint_margin(robust, x)
                    >= surrogate.constraint_margin(plugin, x) - 1e-12
                )

    def test_lifted_rows_consistent_with_margin(self):
        rng = np.random.default_rng(45)
        state, support, spec = random_cov_instance(rng, 3, "box")
        sched = schedules.schedule_cov_auto(200, spec.alpha)
        blocks = surrogate.build_robust(state, support, spec, sched)
        est = state.extract()
        factor = surrogate.covariance_factor(est.covariance)
        widths = support.upper - support.lower
        for _ in range(1000):
            x = rng.normal(size=3)
            z = spec.map @ x
            r = support.radius(z)
            lift = np.concatenate([
                x,
                np.abs(widths * z),                       # L1 lifting variables
                [np.linalg.norm(factor.T @ z)],           # moment norm bound
                [math.sqrt(2.0 * sched.phi) * r],         # radius norm bound
            ])
            worst_linear = max(
                row.coeffs @ lift + row.constant for row in blocks.linear_rows
            )
            assert worst_linear <= 1e-10
            # the binding half of each absolute-value pair holds with equality
            pair_gaps = [row.coeffs @ lift + row.constant for row in blocks.linear_rows]
            assert max(pair_gaps) >= -1e-10 or all(abs(v) < 1e-9 for v in z)
            main = blocks.soc_rows[-1]
            lhs = np.linalg.norm(main.a @ lift + main.b)
            rhs = main.c @ lift + main.e
            assert lhs - rhs == pytest.approx(
                surrogate.constraint_margin(blocks, x), rel=1e-10, abs=1e-10
            )

    def test_offset_linearity(self):
        rng = np.random.default_rng(46)
        state, support, spec = random_cov_instance(rng, 2, "ellipsoid")
        sched = schedules.schedule_cov_auto(200, spec.alpha)
        shifted = surrogate.ChanceSpec(spec.map, spec.offset + 0.7, spec.alpha)
        base = surrogate.build_robust(state, support, spec, sched)
        moved = surrogate.build_robust(state, support, shifted, sched)
        for _ in range(20):
            x = rng.normal(size=2)
            assert surrogate.constraint_margin(moved, x) == pytest.approx(
                surrogate.constraint_margin(base, x) + 0.7, rel=1e-12
            )

    def test_infeasible_schedule_rejected(self):
        rng = np.random.default_rng(47)
        state, support, spec = random_cov_instance(rng, 2, "box")
        bad = schedules.schedule_cov_auto(200, spec.alpha)
        bad = schedules.ScheduleResult("cov_auto", 200, spec.alpha, None, False,
                                       bad.kappa, bad.phi, None)
        with pytest.raises(surrogate.NotEnoughSamples):
            surrogate.build_robust(state, support, spec, bad)

    def test_wrong_schedule_family_rejected(self):
        rng = np.random.default_rng(48)
        state, support, spec = random_cov_instance(rng, 2, "box")
        sched = schedules.schedule_mean_auto(200, spec.alpha)
        with pytest.raises(ValueError):
            surrogate.build_robust(state, support, spec, sched)

    def test_collapses_to_known_at_limit(self):
        rng = np.random.default_rng(49)
        state, support, spec = random_cov_instance(rng, 3, "box")
        est = state.extract()
        pinned = pinned_cov(est.count, spec.alpha)
        robust = surrogate.build_robust(state, support, spec, pinned)
        known = surrogate.build_known(est.mean, est.covariance, spec)
        assert robust.aux_roles == known.aux_roles == ()
        assert len(robust.linear_rows) == len(known.linear_rows)
        assert len(robust.soc_rows) == len(known.soc_rows) == 1
        np.testing.assert_allclose(robust.soc_rows[0].a, known.soc_rows[0].a, rtol=1e-12)
        np.testing.assert_allclose(robust.soc_rows[0].c, known.soc_rows[0].c, rtol=1e-12)
        assert robust.soc_rows[0].e == pytest.approx(known.soc_rows[0].e, rel=1e-12)


class TestFixedConfidence:
    def test_margin_matches_displayed_form(self):
        rng = np.random.default_rng(51)
        state, support, spec = random_cov_instance(rng, 3, "box")
        delta = spec.alpha / 2.0
        blocks = surrogate.build_fixed_confidence(state, support, spec, delta)
        est = state.extract()
        n = est.count
        c_mean = (2.0 + math.sqrt(2.0 * math.log(2.0 / delta))) / math.sqrt(n)
        c_cov = (2.0 + math.sqrt(2.0 * math.log(4.0 / delta))) / math.sqrt(n)
        const = math.sqrt((1.0 - spec.alpha) / (spec.alpha - delta))
        for _ in range(50):
            x = rng.normal(size=3)
            z = spec.map @ x
            r = support.radius(z)
            expected = (
                est.mean @ z
                + spec.offset
                + c_mean * r
                + const * math.sqrt(z @ est.covariance @ z + 2.0 * c_cov * r * r)
            )
            assert surrogate.constraint_margin(blocks, x) == pytest.approx(
                expected, rel=1e-9, abs=1e-9
            )

    def test_widened_flag_tightens(self):
        rng = np.random.default_rng(52)
        state, support, spec = random_cov_instance(rng, 2, "box")
        delta = spec.alpha / 2.0
        plain = surrogate.build_fixed_confidence(state, support, spec, delta)
        wide = surrogate.build_fixed_confidence(state, support, spec, delta,
                                                widened_mean=True)
        x = rng.normal(size=2)
        z = spec.map @ x
        if support.radius(z) > 1e-9:
            assert surrogate.constraint_margin(wide, x) > surrogate.constraint_margin(
                plain, x
            )

    def test_point_support_drops_radius_terms(self):
        point = np.array([0.3, -0.8])
        support = supports.Box(point, point)
        state = full_state(np.tile(point, (100, 1)) + 0.0)
        spec = identity_spec(2, 0.2)
        blocks = surrogate.build_fixed_confidence(state, support, spec, 0.1)
        est = state.extract()
        const = math.sqrt(0.8 / 0.1)
        x = np.array([1.0, 2.0])
        expected = est.mean @ x + const * math.sqrt(x @ est.covariance @ x)
        assert surrogate.constraint_margin(blocks, x) == pytest.approx(expected, abs=1e-10)

    def test_delta_validation(self):
        rng = np.random.default_rng(53)
        state, support, spec = random_cov_instance(rng, 2, "box")
        with pytest.raises(ValueError):
            surrogate.build_fixed_confidence(state, support, spec, spec.alpha)

    def test_small_n_condition(self):
        spec = identity_spec(1, 0.3)
        support = supports.Box([-1.0], [1.0])
        state = full_state([[0.1], [0.2], [-0.1]])
        with pytest.raises(surrogate.NotEnoughSamples):
            surrogate.build_fixed_confidence(state, support, spec, 0.05)


class TestIndependentMean:
    def test_scalar_threshold_hand_check(self):
        state = diag_state(np.full((100, 1), 0.2))
        box = supports.Box([0.0], [1.0])
        spec = identity_spec(1, 0.1)
        sched = schedules.schedule_mean_auto(100, 0.1)
        blocks = surrogate.build_indep_mean(state, box, spec, sched)
        phi = (2.0 + math.sqrt(2.0 * math.log(10.0 / 0.1))) / 10.0
        nu = 0.5 * math.log(1.0 + 0.9 / 9.0)
        coeff = 0.5 * phi + math.sqrt(0.5 * math.log(10.0) + nu)
        assert surrogate.constraint_margin(blocks, [1.0]) == pytest.approx(
            0.2 + coeff, rel=1e-12
        )

    def test_zero_point(self):
        state = diag_state(np.full((50, 2), 0.5))
        box = supports.Box([0.0, 0.0], [1.0, 1.0])
        sched = schedules.schedule_mean_auto(50, 0.2)
        blocks = surrogate.build_indep_mean(state, box, identity_spec(2, 0.2), sched)
        assert surrogate.constraint_margin(blocks, np.zeros(2)) == pytest.approx(0.0, abs=1e-15)

    def test_collapses_to_known_at_limit(self):
        rng = np.random.default_rng(54)
        samples = rng.uniform(0.0, 1.0, size=(100, 3))
        state = diag_state(samples)
        box = supports.Box(np.zeros(3), np.ones(3))
        spec = identity_spec(3, 0.1)
        pinned = pinned_mean(100, 0.1)
        data = surrogate.build_indep_mean(state, box, spec, pinned)
        known = surrogate.build_known_indep_mean(state.extract().mean, box, spec)
        assert data.aux_roles == known.aux_roles
        assert len(data.linear_rows) == len(known.linear_rows)
        for left, right in zip(data.linear_rows, known.linear_rows):
            np.testing.assert_allclose(left.coeffs, right.coeffs, rtol=1e-12, atol=1e-15)
            assert left.constant == pytest.approx(right.constant, abs=1e-15)

    def test_box_required(self):
        state = diag_state(np.full((50, 2), 0.5))
        ell = supports.Ellipsoid(np.zeros(2), np.eye(2))
        sched = schedules.schedule_mean_auto(50, 0.2)
        with pytest.raises(ValueError):
            surrogate.build_indep_mean(state, ell, identity_spec(2, 0.2), sched)

    def test_diagonal_mode_required(self):
        state = full_state(np.full((50, 1), 0.5))
        box = supports.Box([0.0], [1.0])
        sched = schedules.schedule_mean_auto(50, 0.2)
        with pytest.raises(ValueError):
            surrogate.build_indep_mean(state, box, identity_spec(1, 0.2), sched)


class TestIndependentVariance:
    def test_margin_matches_displayed_form(self):
        rng = np.random.default_rng(55)
        samples = rng.uniform(-1.0, 1.0, size=(300, 2))
        state = diag_state(samples)
        box = supports.Box([-1.0, -1.0], [1.0, 1.0])
        spec = identity_spec(2, 0.2, offset=-0.1)
        sched = schedules.schedule_cov_auto(300, 0.2)
        blocks = surrogate.build_indep_var(state, box, spec, sched)
        est = state.extract()
        dvec = np.sqrt(est.covariance)
        const = math.sqrt(0.8 / 0.2)
        for _ in range(50):
            x = rng.normal(size=2)
            l1 = float(np.abs(2.0 * x).sum())  # widths are all 2
            expected = (
                est.mean @ x
                - 0.1
                + 0.5 * sched.phi * l1
                + sched.kappa * const
                * math.sqrt((dvec * x) @ (dvec * x) + 0.5 * sched.phi * l1 * l1)
            )
            assert surrogate.constraint_margin(blocks, x) == pytest.approx(
                expected, rel=1e-9, abs=1e-9
            )

    def test_constant_samples_leave_support_terms(self):
        state = diag_state(np.full((400, 1), 0.25))
        box = supports.Box([0.0], [1.0])
        spec = identity_spec(1, 0.2)
        sched = schedules.schedule_cov_auto(400, 0.2)
        blocks = surrogate.build_indep_var(state, box, spec, sched)
        const = math.sqrt(0.8 / 0.2)
        x = np.array([2.0])
        expected = 0.25 * 2.0 + 0.5 * sched.phi * 2.0 + sched.kappa * const * math.sqrt(
            0.5 * sched.phi * 4.0
        )
        assert surrogate.constraint_margin(blocks, x) == pytest.approx(expected, rel=1e-10)

    def test_collapses_to_known_at_limit(self):
        rng = np.random.default_rng(56)
        samples = rng.uniform(-1.0, 1.0, size=(300, 2))
        state = diag_state(samples)
        box = supports.Box([-1.0, -1.0], [1.0, 1.0])
        spec = identity_spec(2, 0.3)
        pinned = pinned_cov(300, 0.3)
        data = surrogate.build_indep_var(state, box, spec, pinned)
        est = state.extract()
        known = surrogate.build_known_indep_var(est.mean, est.covariance, spec)
        assert data.aux_roles == known.aux_roles == ()
        assert len(data.soc_rows) == len(known.soc_rows) == 1
        np.testing.assert_allclose(data.soc_rows[0].a, known.soc_rows[0].a, rtol=1e-12)
        np.testing.assert_allclose(data.soc_rows[0].c, known.soc_rows[0].c, rtol=1e-12)


class TestBestOfBoth:
    def test_two_samples_fall_back_to_mean_form(self):
        state = diag_state([[-3.5], [-3.4]])
        box = supports.Box([-4.0], [-3.0])
        spec = identity_spec(1, 0.2)
        blocks, sol = surrogate.best_of_both(
            state, box, spec, objective=[1.0], sense="max",
            extra_rows=[([1.0], "<=", 1.0)], lower_bounds=[0.0],
        )
        assert blocks.method == "indep_mean"
        assert sol.status == conic.OPTIMAL
        assert sol.objective == pytest.approx(1.0, abs=1e-6)

    def test_wide_box_low_variance_prefers_variance_form(self):
        rng = np.random.default_rng(57)
        samples = np.clip(rng.normal(-2.0, 0.1, size=(100_000, 1)), -3.0, 3.0)
        state = diag_state(samples)
        box = supports.Box([-3.0], [3.0])
        spec = identity_spec(1, 0.1)
        blocks, sol = surrogate.best_of_both(
            state, box, spec, objective=[1.0], sense="max",
            extra_rows=[([1.0], "<=", 1.0)], lower_bounds=[0.0],
        )
        assert blocks.method == "indep_var"
        assert sol.objective == pytest.approx(1.0, abs=1e-6)

    def test_matches_better_single_method_objective(self):
        # positive offset makes the constraint bind away from the origin, so
        # the two surrogates reach genuinely different minima
        rng = np.random.default_rng(58)
        samples = rng.uniform(-0.45, -0.35, size=(500, 2))
        state = diag_state(samples)
        box = supports.Box([-0.45, -0.45], [-0.35, -0.35])
        spec = identity_spec(2, 0.2, offset=0.2)
        kwargs = dict(objective=[1.0, 1.0], sense="min", lower_bounds=[0.0, 0.0])
        _, sol = surrogate.best_of_both(state, box, spec, **kwargs)
        singles = []
        for builder, sched in (
            (surrogate.build_indep_mean, schedules.schedule_mean_auto(500, 0.2)),
            (surrogate.build_indep_var, schedules.schedule_cov_auto(500, 0.2)),
        ):
            blocks = builder(state, box, spec, sched)
            prog = surrogate.assemble_program(blocks, **kwargs)
            singles.append(conic.solve(prog).objective)
        assert sol.objective == pytest.approx(min(singles), rel=1e-6, abs=1e-8)

    def test_single_sample_rejected(self):
        state = diag_state([[0.5]])
        box = supports.Box([0.0], [1.0])
        with pytest.raises(surrogate.NotEnoughSamples):
            surrogate.best_of_both(state, box, identity_spec(1, 0.2),
                                   objective=[1.0], sense="max")


class TestSerialization:
    def test_debug_json_structure(self):
        rng = np.random.default_rng(59)
        state, support, spec = random_cov_instance(rng, 2, "box")
        sched = schedules.schedule_cov_auto(200, spec.alpha)
        blocks = surrogate.build_robust(state, support, spec, sched)
        data = json.loads(blocks.to_debug_json())
        assert data["method"] == "robust"
        assert data["decision_dim"] == 2
        assert set(data["aux_roles"]) == {"l1_lift", "moment_norm", "radius_norm"}
        assert len(data["linear_rows"]) == len(blocks.linear_rows)
        assert len(data["soc_rows"]) == len(blocks.soc_rows)

    def test_solution_feasible_for_assembled_program(self):
        rng = np.random.default_rng(60)
        state, support, _ = random_cov_instance(rng, 2, "ellipsoid")
        spec = surrogate.ChanceSpec(-np.eye(2), 0.05, 0.2)
        sched = schedules.schedule_cov_auto(200, 0.2)
        blocks = surrogate.build_robust(state, support, spec, sched)
        prog = surrogate.assemble_program(
            blocks, [1.0, 1.0], sense="max",
            extra_rows=[([1.0, 1.0], "<=", 1.0)], lower_bounds=[0.0, 0.0],
        )
        sol = conic.solve(prog)
        if sol.status == conic.OPTIMAL:
            ok, worst = conic.check(prog, sol.x, feas_tol=1e-7)
            assert ok, worst
            assert surrogate.constraint_margin(blocks, sol.x[:2]) <= 1e-7


class TestMarginBatch:
    def test_matches_scalar_across_families(self):
        rng = np.random.default_rng(77)
        cases = []
        for kind in ("box", "polytope", "ellipsoid"):
            state, support, spec = random_cov_instance(rng, 3, kind)
            sched = schedules.schedule_cov_auto(state.count, spec.alpha)
            cases.append(surrogate.build_robust(state, support, spec, sched))
        state, support, spec = random_cov_instance(rng, 3, "box")
        cases.append(surrogate.build_plugin(state, spec))
        samples = rng.normal(size=(150, 2)) * 0.3 - 1.0
        box = supports.Box(samples.min(axis=0) - 0.1, samples.max(axis=0) + 0.1)
        spec2 = identity_spec(2, 0.2)
        dstate = diag_state(samples)
        cases.append(surrogate.build_indep_mean(
            dstate, box, spec2, schedules.schedule_mean_auto(150, 0.2)))
        cases.append(surrogate.build_indep_var(
            dstate, box, spec2, schedules.schedule_cov_auto(150, 0.2)))
        for blocks in cases:
            pts = rng.normal(size=(25, blocks.decision_dim))
            batch = surrogate.constraint_margin_batch(blocks, pts)
            assert batch.shape == (25,)
            for i in range(25):
                scalar = surrogate.constraint_margin(blocks, pts[i])
                assert batch[i] == pytest.approx(scalar, rel=1e-12, abs=1e-12)

    def test_rejects_vector_input(self):
        blocks = surrogate.build_known([0.0], [[1.0]], identity_spec(1, 0.2))
        with pytest.raises(ValueError):
            surrogate.constraint_margin_batch(blocks, np.zeros(3))
