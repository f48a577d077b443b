"""Deterministic convex surrogates for moment-based chance constraints.

Every builder turns "Pr(a'(Mx) + d <= 0) >= 1 - alpha" into linear and
second-order cone rows over the decision x plus a few auxiliary variables,
ready to drop into the embedded conic solver. The known-moment forms are
exact one-sided Chebyshev cuts; the data-driven forms add sample-size
dependent padding (a kappa inflation of the covariance norm, a phi multiple
of the support radius, or an additive nu term) so the guarantee holds for
the finite sample, not just in the limit.

Builders are pure and blocks are immutable, so surrogates can be built
concurrently across trials. `constraint_margin` evaluates the collapsed
scalar form of each constraint directly, independent of the lifted
encoding, and is the reference the tests and the grid solver use.

Data-driven builders raise NotEnoughSamples when the schedule's sample-size
condition fails; callers that sweep N treat that as "no decision yet"
rather than an error.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import conic, schedules, supports


class NotEnoughSamples(RuntimeError):
    """The sample-size condition of the requested guarantee is not met."""


class ChanceSpec:
    """The chance constraint Pr(a'(Mx) + d <= 0) >= 1 - alpha.

    `map_matrix` is M (rows live in the random vector's space, columns in
    the decision space); `offset` is the deterministic scalar d.
    """

    def __init__(self, map_matrix, offset: float, alpha: float):
        map_matrix = np.atleast_2d(np.asarray(map_matrix, dtype=float))
        if map_matrix.size == 0 or not np.all(np.isfinite(map_matrix)):
            raise ValueError("map matrix must be nonempty and finite")
        if not 0.0 < float(alpha) < 1.0:
            raise ValueError(f"alpha must lie in (0,1), got {alpha}")
        map_matrix.flags.writeable = False
        self.map = map_matrix
        self.offset = float(offset)
        self.alpha = float(alpha)
        self.random_dim = map_matrix.shape[0]
        self.decision_dim = map_matrix.shape[1]


@dataclass(frozen=True)
class LinearRow:
    """coeffs @ vars + constant <= 0 over [decision; auxiliary]."""

    coeffs: np.ndarray
    constant: float


@dataclass(frozen=True)
class SocRow:
    """||a @ vars + b|| <= c @ vars + e over [decision; auxiliary]."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    e: float


@dataclass(frozen=True)
class SurrogateBlocks:
    method: str
    decision_dim: int
    aux_roles: tuple
    linear_rows: tuple
    soc_rows: tuple
    params: dict

    @property
    def num_vars(self) -> int:
        return self.decision_dim + len(self.aux_roles)

    def to_debug_json(self) -> str:
        def clean(value):
            if isinstance(value, np.ndarray):
                return value.tolist()
            if isinstance(value, (supports.Box, supports.Polytope, supports.Ellipsoid)):
                return supports.to_config(value)
            if isinstance(value, (np.floating, np.integer)):
                return value.item()
            return value

        return json.dumps(
            {
                "method": self.method,
                "decision_dim": self.decision_dim,
                "aux_roles": list(self.aux_roles),
                "linear_rows": [
                    {"coeffs": row.coeffs.tolist(), "constant": row.constant}
                    for row in self.linear_rows
                ],
                "soc_rows": [
                    {"a": row.a.tolist(), "b": row.b.tolist(),
                     "c": row.c.tolist(), "e": row.e}
                    for row in self.soc_rows
                ],
                "params": {k: clean(v) for k, v in self.params.items()},
            },
            sort_keys=True,
        )


def covariance_factor(sigma, tol: float = 1e-10) -> np.ndarray:
    """Symmetric factor L with L L' = sigma; tiny negative eigenvalues are
    clipped, genuinely indefinite matrices are rejected."""
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    if sigma.shape[0] != sigma.shape[1]:
        raise ValueError("covariance must be square")
    if not np.allclose(sigma, sigma.T, rtol=1e-8, atol=1e-10):
        raise ValueError("covariance must be symmetric")
    vals, vecs = np.linalg.eigh(sigma)
    if vals.min() < -tol * max(1.0, float(np.trace(sigma))):
        raise ValueError("covariance must be positive semidefinite")
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def constraint_margin(blocks: SurrogateBlocks, x) -> float:
    """Scalar constraint value at x (feasible iff <= 0), evaluated from the
    collapsed closed form rather than the lifted rows."""
    x = np.asarray(x, dtype=float)
    if x.shape != (blocks.decision_dim,):
        raise ValueError(
            f"point of length {blocks.decision_dim} required, got shape {x.shape}"
        )
    p = blocks.params
    z = p["map"] @ x
    base = float(p["mu"] @ z) + p["offset"]
    family = p["family"]
    if family == "cov":
        support = p["support"]
        r = support.radius(z) if support is not None else 0.0
        w = p["factor"].T @ z
        return base + p["outer"] * r + p["normc"] * math.sqrt(
            float(w @ w) + p["y2sq"] * r * r
        )
    l1 = float(np.abs(p["widths"] * z).sum()) if p["widths"] is not None else 0.0
    if family == "ind_mean":
        return base + p["coeff"] * l1
    if family == "ind_var":
        dz = p["dvec"] * z
        return base + p["half_phi"] * l1 + p["normc"] * math.sqrt(
            float(dz @ dz) + p["half_phi"] * l1 * l1
        )
    raise ValueError(f"unknown block family {family!r}")


def constraint_margin_batch(blocks: SurrogateBlocks, points):
    """Vectorized `constraint_margin` over the rows of `points`."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != blocks.decision_dim:
        raise ValueError(
            f"array of shape (m, {blocks.decision_dim}) required, "
            f"got {points.shape}"
        )
    p = blocks.params
    rows = points @ p["map"].T
    base = rows @ p["mu"] + p["offset"]
    family = p["family"]
    if family == "cov":
        support = p["support"]
        r = support.radius_batch(rows) if support is not None else 0.0
        quad = np.square(rows @ p["factor"]).sum(axis=1)
        return base + p["outer"] * r + p["normc"] * np.sqrt(
            quad + p["y2sq"] * r * r
        )
    l1 = np.abs(rows * p["widths"]).sum(axis=1) if p["widths"] is not None else 0.0
    if family == "ind_mean":
        return base + p["coeff"] * l1
    if family == "ind_var":
        quad = np.square(rows * p["dvec"]).sum(axis=1)
        return base + p["half_phi"] * l1 + p["normc"] * np.sqrt(
            quad + p["half_phi"] * l1 * l1
        )
    raise ValueError(f"unknown block family {family!r}")


def assemble_program(
    blocks: SurrogateBlocks,
    objective,
    sense: str = "min",
    extra_rows=(),
    lower_bounds=None,
) -> conic.ConicProgram:
    """Wrap blocks plus caller rows into a solvable program.

    `objective`, `extra_rows`, and `lower_bounds` are expressed over the
    decision variables only; auxiliary columns are appended automatically.
    """
    objective = np.asarray(objective, dtype=float)
    if objective.shape != (blocks.decision_dim,):
        raise ValueError("objective length must match the decision dimension")
    n = blocks.num_vars
    padded = np.zeros(n)
    padded[: blocks.decision_dim] = objective
    prog = conic.ConicProgram(n, padded, sense)
    for row in blocks.linear_rows:
        prog.add_linear(row.coeffs, "<=", -row.constant)
    for row in blocks.soc_rows:
        prog.add_soc(row.a, row.b, row.c, row.e)
    for coeffs, relation, constant in extra_rows:
        coeffs = np.asarray(coeffs, dtype=float)
        wide = np.zeros(n)
        wide[: blocks.decision_dim] = coeffs
        prog.add_linear(wide, relation, constant)
    if lower_bounds is not None:
        for i, bound in enumerate(np.asarray(lower_bounds, dtype=float)):
            if np.isfinite(bound):
                prog.set_lower_bound(i, bound)
    return prog


# ---------------------------------------------------------------------------
# covariance-norm family


def build_known(mu, sigma, spec: ChanceSpec) -> SurrogateBlocks:
    """Exact cut for known mean and covariance:
    mu'z + d + sqrt((1-alpha)/alpha) * sqrt(z' sigma z) <= 0."""
    mu = _check_mu(mu, spec)
    factor = covariance_factor(sigma)
    if factor.shape[0] != spec.random_dim:
        raise ValueError("covariance size does not match the random dimension")
    normc = math.sqrt((1.0 - spec.alpha) / spec.alpha)
    return _cov_family_blocks("known", mu, factor, None, spec, 0.0, 0.0, normc)


def build_plugin(state, spec: ChanceSpec) -> SurrogateBlocks:
    """Sample mean and covariance dropped straight into the known-moment
    cut; no finite-sample guarantee attached."""
    est = _extract_full(state, spec)
    normc = math.sqrt((1.0 - spec.alpha) / spec.alpha)
    factor = covariance_factor(est.covariance)
    return _cov_family_blocks("plugin", est.mean, factor, None, spec, 0.0, 0.0, normc)


def build_robust(state, support, spec: ChanceSpec, sched) -> SurrogateBlocks:
    """Sample-moment cut padded by the (kappa, phi) schedule:
    mu'z + d + phi r(z) + kappa sqrt((1-a)/a) ||y|| <= 0 with
    ||L'z|| <= y1 and sqrt(2 phi) r(z) <= y2."""
    est = _extract_full(state, spec)
    _check_support(support, spec)
    _check_sched(sched, spec, est.count, ("cov", "cov_auto"))
    normc = sched.kappa * math.sqrt((1.0 - spec.alpha) / spec.alpha)
    factor = covariance_factor(est.covariance)
    return _cov_family_blocks(
        "robust", est.mean, factor, support, spec, sched.phi, 2.0 * sched.phi, normc
    )


def build_fixed_confidence(
    state, support, spec: ChanceSpec, delta: float, widened_mean: bool = False
) -> SurrogateBlocks:
    """Sample-moment cut padded by fixed-confidence moment-error radii at
    level delta, with the violation budget split as (alpha - delta)."""
    est = _extract_full(state, spec)
    _check_support(support, spec)
    delta = float(delta)
    if not 0.0 < delta < spec.alpha:
        raise ValueError(f"delta must lie in (0, alpha), got {delta}")
    bounds = schedules.confidence_bounds(1.0, est.count, delta, widened_mean)
    if not bounds.condition_ok:
        raise NotEnoughSamples(
            f"{est.count} samples are too few for confidence level {delta}"
        )
    normc = math.sqrt((1.0 - spec.alpha) / (spec.alpha - delta))
    factor = covariance_factor(est.covariance)
    return _cov_family_blocks(
        "fixed_confidence", est.mean, factor, support, spec,
        bounds.mean, bounds.cov, normc,
    )


def _cov_family_blocks(method, mu, factor, support, spec, outer, y2sq, normc):
    n = spec.decision_dim
    mat = spec.map
    params = {
        "family": "cov", "method": method, "map": mat, "mu": mu,
        "offset": spec.offset, "outer": outer, "y2sq": y2sq, "normc": normc,
        "factor": factor, "support": support, "alpha": spec.alpha,
    }
    mu_x = mat.T @ mu
    if outer == 0.0 and y2sq == 0.0:
        soc = SocRow(
            a=_frozen(normc * (factor.T @ mat)), b=_frozen(np.zeros(factor.shape[1])),
            c=_frozen(-mu_x), e=-spec.offset,
        )
        return SurrogateBlocks(method, n, (), (), (soc,), params)

    roles, linear, socs, r_coeffs, r_const, width = _radius_lift(support, mat, n)
    roles = roles + ("moment_norm", "radius_norm")
    total = n + len(roles)
    y1, y2 = total - 2, total - 1

    def wide(values, aux_tail=()):
        out = np.zeros(total)
        out[: len(values)] = values
        for idx, val in aux_tail:
            out[idx] = val
        return out

    linear = [LinearRow(_frozen(wide(row)), const) for row, const in linear]
    r_vec = wide(r_coeffs)

    # sqrt(y2sq) * r(z) <= y2
    root = math.sqrt(y2sq)
    linear.append(
        LinearRow(_frozen(root * r_vec - _unit(total, y2)), root * r_const)
    )
    soc_rows = [
        SocRow(_frozen(np.pad(a, ((0, 0), (0, total - a.shape[1])))),
               _frozen(b), _frozen(wide(c)), e)
        for a, b, c, e in socs
    ]
    # ||L' z|| <= y1
    soc_rows.append(
        SocRow(
            a=_frozen(np.pad(factor.T @ mat, ((0, 0), (0, total - n)))),
            b=_frozen(np.zeros(factor.shape[1])),
            c=_frozen(_unit(total, y1)), e=0.0,
        )
    )
    # mu'z + d + outer * r(z) + ||normc * (y1, y2)|| <= 0
    main_a = np.zeros((2, total))
    main_a[0, y1] = normc
    main_a[1, y2] = normc
    soc_rows.append(
        SocRow(
            a=_frozen(main_a), b=_frozen(np.zeros(2)),
            c=_frozen(-wide(mu_x) - outer * r_vec),
            e=-spec.offset - outer * r_const,
        )
    )
    return SurrogateBlocks(method, n, roles, tuple(linear), tuple(soc_rows), params)


def _radius_lift(support, mat, n):
    """Encode r(Mx) <= (linear expression in auxiliaries).

    Returns (aux roles, linear rows over [x; radius aux], SOC rows likewise,
    radius coefficients, radius constant, box widths or None). Coefficient
    vectors cover only the first n + len(roles) columns; callers pad.
    """
    if isinstance(support, supports.Box):
        w = support.widths
        m = len(w)
        roles = ("l1_lift",) * m
        linear = []
        for i in range(m):
            row_pos = np.zeros(n + m)
            row_pos[:n] = w[i] * mat[i, :]
            row_pos[n + i] = -1.0
            row_neg = row_pos.copy()
            row_neg[:n] = -row_pos[:n]
            linear.append((row_pos, 0.0))
            linear.append((row_neg, 0.0))
        r_coeffs = np.zeros(n + m)
        r_coeffs[n:] = 0.5
        return roles, linear, [], r_coeffs, 0.0, w
    if isinstance(support, supports.Polytope):
        verts = support.vertices @ mat  # each row: v_k' M
        roles = ("range_upper", "range_lower")
        linear = []
        for vk in verts:
            upper = np.concatenate([vk, [-1.0, 0.0]])
            lower = np.concatenate([-vk, [0.0, 1.0]])
            linear.append((upper, 0.0))
            linear.append((lower, 0.0))
        r_coeffs = np.zeros(n + 2)
        r_coeffs[n] = 0.5
        r_coeffs[n + 1] = -0.5
        return roles, linear, [], r_coeffs, 0.0, None
    if isinstance(support, supports.Ellipsoid):
        roles = ("radius_bound",)
        a = support.inverse_factor().T @ mat
        c = np.zeros(n + 1)
        c[n] = 1.0
        r_coeffs = np.zeros(n + 1)
        r_coeffs[n] = 1.0
        return roles, [], [(a, np.zeros(a.shape[0]), c, 0.0)], r_coeffs, 0.0, None
    raise ValueError(f"unsupported support type {type(support).__name__}")


# ---------------------------------------------------------------------------
# independent-coordinate family (interval supports)


def build_known_indep_mean(mu, box, spec: ChanceSpec) -> SurrogateBlocks:
    """Known-mean independent-coordinate cut:
    mu'z + d + sqrt(ln(1/alpha)/2) ||S z||_1 <= 0."""
    mu = _check_mu(mu, spec)
    _check_box(box, spec)
    coeff = math.sqrt(0.5 * math.log(1.0 / spec.alpha))
    return _l1_blocks("known_indep_mean", mu, box, spec, coeff)


def build_indep_mean(state, box, spec: ChanceSpec, sched) -> SurrogateBlocks:
    """Sample-mean independent-coordinate cut with the (nu, phi) schedule:
    mu'z + d + (phi/2 + sqrt(ln(1/alpha)/2 + nu)) ||S z||_1 <= 0."""
    est = _extract_diag(state, spec)
    _check_box(box, spec)
    _check_sched(sched, spec, est.count, ("mean", "mean_auto"))
    coeff = 0.5 * sched.phi + math.sqrt(0.5 * math.log(1.0 / spec.alpha) + sched.nu)
    return _l1_blocks("indep_mean", est.mean, box, spec, coeff)


def _l1_blocks(method, mu, box, spec, coeff):
    n = spec.decision_dim
    mat = spec.map
    w = box.widths
    params = {
        "family": "ind_mean", "method": method, "map": mat, "mu": mu,
        "offset": spec.offset, "coeff": coeff, "widths": w, "alpha": spec.alpha,
    }
    m = len(w)
    total = n + m
    roles = ("l1_lift",) * m
    linear = []
    for i in range(m):
        row_pos = np.zeros(total)
        row_pos[:n] = w[i] * mat[i, :]
        row_pos[n + i] = -1.0
        row_neg = row_pos.copy()
        row_neg[:n] = -row_pos[:n]
        linear.append(LinearRow(_frozen(row_pos), 0.0))
        linear.append(LinearRow(_frozen(row_neg), 0.0))
    main = np.zeros(total)
    main[:n] = mat.T @ mu
    main[n:] = coeff
    linear.append(LinearRow(_frozen(main), spec.offset))
    return SurrogateBlocks(method, n, roles, tuple(linear), (), params)


def build_known_indep_var(mu, variances, spec: ChanceSpec) -> SurrogateBlocks:
    """Known-variance independent-coordinate cut:
    mu'z + d + sqrt((1-alpha)/alpha) ||D z||_2 <= 0, D = diag(std devs)."""
    mu = _check_mu(mu, spec)
    variances = np.asarray(variances, dtype=float)
    if variances.shape != (spec.random_dim,) or np.any(variances < 0.0):
        raise ValueError("variances must be a nonnegative vector over coordinates")
    normc = math.sqrt((1.0 - spec.alpha) / spec.alpha)
    return _diag_norm_blocks(
        "known_indep_var", mu, np.sqrt(variances), None, spec, 0.0, normc
    )


def build_indep_var(state, box, spec: ChanceSpec, sched) -> SurrogateBlocks:
    """Sample-variance independent-coordinate cut with the (kappa, phi)
    schedule: mu'z + d + (phi/2)||S z||_1 + kappa sqrt((1-a)/a) ||y|| <= 0
    with ||D z|| <= y1 and sqrt(phi/2) ||S z||_1 <= y2."""
    est = _extract_diag(state, spec)
    _check_box(box, spec)
    _check_sched(sched, spec, est.count, ("cov", "cov_auto"))
    normc = sched.kappa * math.sqrt((1.0 - spec.alpha) / spec.alpha)
    dvec = np.sqrt(est.covariance)
    return _diag_norm_blocks(
        "indep_var", est.mean, dvec, box, spec, 0.5 * sched.phi, normc
    )


def _diag_norm_blocks(method, mu, dvec, box, spec, half_phi, normc):
    n = spec.decision_dim
    mat = spec.map
    widths = box.widths if box is not None else None
    params = {
        "family": "ind_var", "method": method, "map": mat, "mu": mu,
        "offset": spec.offset, "half_phi": half_phi, "normc": normc,
        "dvec": dvec, "widths": widths, "alpha": spec.alpha,
    }
    mu_x = mat.T @ mu
    if half_phi == 0.0:
        soc = SocRow(
            a=_frozen(normc * (dvec[:, None] * mat)), b=_frozen(np.zeros(len(dvec))),
            c=_frozen(-mu_x), e=-spec.offset,
        )
        return SurrogateBlocks(method, n, (), (), (soc,), params)

    m = len(widths)
    roles = ("l1_lift",) * m + ("moment_norm", "radius_norm")
    total = n + m + 2
    y1, y2 = total - 2, total - 1
    linear = []
    for i in range(m):
        row_pos = np.zeros(total)
        row_pos[:n] = widths[i] * mat[i, :]
        row_pos[n + i] = -1.0
        row_neg = row_pos.copy()
        row_neg[:n] = -row_pos[:n]
        linear.append(LinearRow(_frozen(row_pos), 0.0))
        linear.append(LinearRow(_frozen(row_neg), 0.0))
    # sqrt(phi/2) * sum t <= y2
    root = math.sqrt(half_phi)
    y2_row = np.zeros(total)
    y2_row[n : n + m] = root
    y2_row[y2] = -1.0
    linear.append(LinearRow(_frozen(y2_row), 0.0))
    # ||D z|| <= y1
    soc_rows = [
        SocRow(
            a=_frozen(np.pad(dvec[:, None] * mat, ((0, 0), (0, total - n)))),
            b=_frozen(np.zeros(len(dvec))),
            c=_frozen(_unit(total, y1)), e=0.0,
        )
    ]
    main_a = np.zeros((2, total))
    main_a[0, y1] = normc
    main_a[1, y2] = normc
    main_c = np.zeros(total)
    main_c[:n] = -mu_x
    main_c[n : n + m] = -half_phi
    soc_rows.append(
        SocRow(a=_frozen(main_a), b=_frozen(np.zeros(2)),
               c=_frozen(main_c), e=-spec.offset)
    )
    return SurrogateBlocks(method, n, roles, tuple(linear), tuple(soc_rows), params)


def best_of_both(
    state, box, spec: ChanceSpec, objective,
    sense: str = "min", extra_rows=(), lower_bounds=None,
):
    """Build both independent-coordinate surrogates that the sample count
    allows, solve the caller's objective under each, and return the blocks
    and solution of the better one (the variance form needs far more
    samples than the mean form, which works from two)."""
    est = _extract_diag(state, spec)
    if est.count < 2:
        raise NotEnoughSamples("need at least two samples")
    candidates = []
    mean_sched = schedules.schedule_mean_auto(est.count, spec.alpha)
    candidates.append(build_indep_mean(state, box, spec, mean_sched))
    var_sched = schedules.schedule_cov_auto(est.count, spec.alpha)
    if var_sched.feasible:
        candidates.append(build_indep_var(state, box, spec, var_sched))
    best = None
    statuses = []
    better = max if sense == "max" else min
    for blocks in candidates:
        prog = assemble_program(blocks, objective, sense, extra_rows, lower_bounds)
        sol = conic.solve(prog)
        statuses.append(sol.status)
        if sol.status != conic.OPTIMAL:
            continue
        if best is None or better(sol.objective, best[1].objective) == sol.objective:
            best = (blocks, sol)
    if best is None:
        raise RuntimeError(f"no surrogate produced a solution (statuses: {statuses})")
    return best


# ---------------------------------------------------------------------------
# shared validation helpers


def _frozen(arr):
    arr = np.asarray(arr, dtype=float)
    arr.flags.writeable = False
    return arr


def _unit(total, index):
    out = np.zeros(total)
    out[index] = 1.0
    return out


def _check_mu(mu, spec):
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (spec.random_dim,):
        raise ValueError("mean length does not match the random dimension")
    return mu


def _check_support(support, spec):
    if support.dim != spec.random_dim:
        raise ValueError("support dimension does not match the random dimension")


def _check_box(box, spec):
    if not isinstance(box, supports.Box):
        raise ValueError("independent-coordinate builders need a box support")
    if box.dim != spec.random_dim:
        raise ValueError("support dimension does not match the random dimension")


def _check_sched(sched, spec, count, families):
    if sched.method not in families:
        raise ValueError(
            f"schedule family {sched.method!r} does not fit this builder"
        )
    if sched.alpha != spec.alpha:
        raise ValueError("schedule and constraint disagree on alpha")
    if sched.n != count:
        raise ValueError(
            f"schedule was computed for N={sched.n}, state holds {count}"
        )
    if not sched.feasible:
        raise NotEnoughSamples(
            f"{count} samples do not satisfy the schedule's condition"
        )


def _extract_full(state, spec):
    if state.mode != "full":
        raise ValueError("this builder needs a full-covariance moment state")
    if state.dim != spec.random_dim:
        raise ValueError("moment state dimension does not match the constraint")
    if state.count == 0:
        raise ValueError("no samples ingested yet")
    return state.extract()


def _extract_diag(state, spec):
    if state.mode != "diagonal":
        raise ValueError("this builder needs a diagonal moment state")
    if state.dim != spec.random_dim:
        raise ValueError("moment state dimension does not match the constraint")
    if state.count == 0:
        raise ValueError("no samples ingested yet")
    return state.extract()
