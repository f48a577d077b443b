"""Minimal conic programs and an embedded small-scale interior-point solver.

A :class:`ConicProgram` holds a linear objective, linear rows (inequality or
equality), second-order cone rows of the form ``||A v + b|| <= c'v + e``, and
optional per-variable lower bounds. :func:`solve` runs a primal-dual
infeasible-start interior-point method with Nesterov-Todd scaling over the
product of the nonnegative orthant and second-order cones, using Mehrotra
predictor-corrector steps and dense linear algebra. Problem sizes here are
tiny (tens of variables), so no sparsity is exploited.

Infeasibility is decided by a phase-1 elastic program (minimize the largest
constraint violation) rather than by dual certificates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
ITERATION_LIMIT = "iteration_limit"
NUMERICAL_FAILURE = "numerical_failure"

_RELATIONS = ("<=", "==")


@dataclass(frozen=True)
class Tolerances:
    feasibility: float = 1e-8
    optimality: float = 1e-8
    max_iterations: int = 200
    infeasibility: float = 1e-6


@dataclass
class Solution:
    """Solver output: status, decision, objective, worst primal residual."""

    status: str
    x: np.ndarray | None
    objective: float | None
    max_residual: float
    iterations: int


class ConicProgram:
    """A linear objective over linear and second-order cone constraints.

    Linear rows mean ``coeffs @ x <= constant`` or ``coeffs @ x == constant``.
    SOC rows mean ``||A @ x + b||_2 <= c @ x + e``. Lower bounds default to
    unbounded; variables are otherwise free.
    """

    def __init__(self, num_vars: int, objective, sense: str = "min"):
        num_vars = int(num_vars)
        if num_vars < 1:
            raise ValueError("program needs at least one variable")
        objective = np.asarray(objective, dtype=float)
        if objective.shape != (num_vars,):
            raise ValueError(
                f"objective length {objective.shape} does not match {num_vars} variables"
            )
        if sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {sense!r}")
        self.num_vars = num_vars
        self.objective = objective
        self.sense = sense
        self.linear_rows: list[tuple[np.ndarray, float, str]] = []
        self.soc_rows: list[tuple[np.ndarray, np.ndarray, np.ndarray, float]] = []
        self.lower_bounds = np.full(num_vars, -np.inf)

    def add_linear(self, coeffs, relation: str, constant: float) -> None:
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.num_vars,):
            raise ValueError("linear row length does not match variable count")
        if relation not in _RELATIONS:
            raise ValueError(f"relation must be one of {_RELATIONS}, got {relation!r}")
        if not (np.all(np.isfinite(coeffs)) and np.isfinite(constant)):
            raise ValueError("linear row entries must be finite")
        self.linear_rows.append((coeffs, float(constant), relation))

    def add_soc(self, a_matrix, b_vector, c_coeffs, e_constant: float) -> None:
        a_matrix = np.atleast_2d(np.asarray(a_matrix, dtype=float))
        b_vector = np.asarray(b_vector, dtype=float).ravel()
        c_coeffs = np.asarray(c_coeffs, dtype=float).ravel()
        if a_matrix.shape[1] != self.num_vars or c_coeffs.shape != (self.num_vars,):
            raise ValueError("SOC row width does not match variable count")
        if b_vector.shape[0] != a_matrix.shape[0]:
            raise ValueError("SOC offset length does not match matrix rows")
        if not (
            np.all(np.isfinite(a_matrix))
            and np.all(np.isfinite(b_vector))
            and np.all(np.isfinite(c_coeffs))
            and np.isfinite(e_constant)
        ):
            raise ValueError("SOC row entries must be finite")
        self.soc_rows.append((a_matrix, b_vector, c_coeffs, float(e_constant)))

    def set_lower_bound(self, index: int, bound: float) -> None:
        if not 0 <= index < self.num_vars:
            raise ValueError(f"variable index {index} out of range")
        self.lower_bounds[index] = float(bound)

    def to_json(self) -> str:
        return json.dumps(
            {
                "num_vars": self.num_vars,
                "sense": self.sense,
                "objective": self.objective.tolist(),
                "linear_rows": [
                    {"coeffs": c.tolist(), "constant": k, "relation": rel}
                    for c, k, rel in self.linear_rows
                ],
                "soc_rows": [
                    {"a": a.tolist(), "b": b.tolist(), "c": c.tolist(), "e": e}
                    for a, b, c, e in self.soc_rows
                ],
                "lower_bounds": [
                    None if not np.isfinite(v) else v for v in self.lower_bounds
                ],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ConicProgram":
        data = json.loads(text)
        prog = cls(data["num_vars"], data["objective"], data["sense"])
        for row in data["linear_rows"]:
            prog.add_linear(row["coeffs"], row["relation"], row["constant"])
        for row in data["soc_rows"]:
            prog.add_soc(row["a"], row["b"], row["c"], row["e"])
        for i, v in enumerate(data["lower_bounds"]):
            if v is not None:
                prog.set_lower_bound(i, v)
        return prog


def check(prog: ConicProgram, candidate, feas_tol: float = 1e-8):
    """Evaluate every row of ``prog`` at ``candidate`` directly.

    Independent of solver internals. Returns ``(feasible, worst_violation)``
    with the violation clipped at zero.
    """
    x = np.asarray(candidate, dtype=float)
    if x.shape != (prog.num_vars,):
        raise ValueError("candidate length does not match variable count")
    worst = 0.0
    for coeffs, constant, relation in prog.linear_rows:
        value = float(coeffs @ x) - constant
        worst = max(worst, abs(value) if relation == "==" else value)
    for a_matrix, b_vector, c_coeffs, e_constant in prog.soc_rows:
        gap = float(np.linalg.norm(a_matrix @ x + b_vector)) - (
            float(c_coeffs @ x) + e_constant
        )
        worst = max(worst, gap)
    finite = np.isfinite(prog.lower_bounds)
    if np.any(finite):
        worst = max(worst, float(np.max(prog.lower_bounds[finite] - x[finite])))
    worst = max(worst, 0.0)
    return worst <= feas_tol, worst


def solve(prog: ConicProgram, tol: Tolerances | None = None) -> Solution:
    """Solve ``prog``; never returns a silent wrong answer.

    Status is ``OPTIMAL`` when residuals meet the tolerances, ``INFEASIBLE``
    when the phase-1 elastic violation stays above ``tol.infeasibility``,
    and ``ITERATION_LIMIT`` / ``NUMERICAL_FAILURE`` otherwise.
    """
    tol = tol or Tolerances()
    sign = 1.0 if prog.sense == "min" else -1.0
    c, A, b, G, h, dims = _standard_form(prog, sign * prog.objective)
    status, x, iters = _ipm(c, A, b, G, h, dims, tol)
    if status != OPTIMAL:
        worst = _phase1_violation(prog, tol)
        if worst is not None and worst > tol.infeasibility:
            return Solution(INFEASIBLE, None, None, worst, iters)
        return Solution(status, None, None, np.inf, iters)
    x = x[: prog.num_vars]
    _, residual = check(prog, x, tol.feasibility)
    return Solution(OPTIMAL, x, float(prog.objective @ x), residual, iters)


# ---------------------------------------------------------------------------
# standard-form conversion


def _standard_form(prog: ConicProgram, objective):
    """Convert to min c'x s.t. Ax = b, Gx + s = h, s in (orthant x SOCs)."""
    n = prog.num_vars
    eq_rows = [(cf, k) for cf, k, rel in prog.linear_rows if rel == "=="]
    ineq_rows = [(cf, k) for cf, k, rel in prog.linear_rows if rel == "<="]
    if eq_rows:
        A = np.vstack([cf for cf, _ in eq_rows])
        b = np.array([k for _, k in eq_rows])
    else:
        A = np.zeros((0, n))
        b = np.zeros(0)

    g_blocks, h_blocks = [], []
    for cf, k in ineq_rows:
        g_blocks.append(cf.reshape(1, -1))
        h_blocks.append(np.array([k]))
    for i, lb in enumerate(prog.lower_bounds):
        if np.isfinite(lb):
            row = np.zeros((1, n))
            row[0, i] = -1.0
            g_blocks.append(row)
            h_blocks.append(np.array([-lb]))
    l = sum(blk.shape[0] for blk in g_blocks)

    soc_dims = []
    for a_matrix, b_vector, c_coeffs, e_constant in prog.soc_rows:
        block = np.vstack([c_coeffs.reshape(1, -1), a_matrix])
        g_blocks.append(-block)
        h_blocks.append(np.concatenate([[e_constant], b_vector]))
        soc_dims.append(1 + a_matrix.shape[0])

    if g_blocks:
        G = np.vstack(g_blocks)
        h = np.concatenate(h_blocks)
    else:
        G = np.zeros((0, n))
        h = np.zeros(0)
    return np.asarray(objective, dtype=float), A, b, G, h, (l, soc_dims)


def _phase1_violation(prog: ConicProgram, tol: Tolerances):
    """Minimize the worst constraint violation; None if phase 1 itself fails."""
    n = prog.num_vars
    elastic = ConicProgram(n + 1, np.concatenate([np.zeros(n), [1.0]]))
    t_col = np.zeros(n + 1)
    t_col[n] = 1.0
    for coeffs, constant, relation in prog.linear_rows:
        wide = np.concatenate([coeffs, [-1.0]])
        elastic.add_linear(wide, "<=", constant)
        if relation == "==":
            elastic.add_linear(np.concatenate([-coeffs, [-1.0]]), "<=", -constant)
    for i, lb in enumerate(prog.lower_bounds):
        if np.isfinite(lb):
            wide = np.zeros(n + 1)
            wide[i] = -1.0
            wide[n] = -1.0
            elastic.add_linear(wide, "<=", -lb)
    for a_matrix, b_vector, c_coeffs, e_constant in prog.soc_rows:
        elastic.add_soc(
            np.hstack([a_matrix, np.zeros((a_matrix.shape[0], 1))]),
            b_vector,
            np.concatenate([c_coeffs, [1.0]]),
            e_constant,
        )
    elastic.add_linear(-t_col, "<=", 1.0)  # t >= -1 keeps phase 1 bounded
    c, A, b, G, h, dims = _standard_form(elastic, elastic.objective)
    status, x, _ = _ipm(c, A, b, G, h, dims, tol)
    if status != OPTIMAL:
        return None
    return float(x[n])


# ---------------------------------------------------------------------------
# cone algebra over s = (orthant block, SOC blocks)


def _blocks(dims):
    l, soc_dims = dims
    spans = []
    start = l
    for d in soc_dims:
        spans.append((start, start + d))
        start += d
    return l, spans


def _identity_element(dims, m):
    l, spans = _blocks(dims)
    e = np.zeros(m)
    e[:l] = 1.0
    for lo, _ in spans:
        e[lo] = 1.0
    return e


def _jprod(u, v, dims):
    """Jordan product on the cone product."""
    l, spans = _blocks(dims)
    out = np.empty_like(u)
    out[:l] = u[:l] * v[:l]
    for lo, hi in spans:
        u0, u1 = u[lo], u[lo + 1 : hi]
        v0, v1 = v[lo], v[lo + 1 : hi]
        out[lo] = u0 * v0 + u1 @ v1
        out[lo + 1 : hi] = u0 * v1 + v0 * u1
    return out


def _jsolve(lam, d, dims):
    """Solve lam o x = d for x (arrow-matrix solve per block)."""
    l, spans = _blocks(dims)
    out = np.empty_like(d)
    out[:l] = d[:l] / lam[:l]
    for lo, hi in spans:
        l0, l1 = lam[lo], lam[lo + 1 : hi]
        det = l0 * l0 - l1 @ l1
        x0 = (l0 * d[lo] - l1 @ d[lo + 1 : hi]) / det
        out[lo] = x0
        out[lo + 1 : hi] = (d[lo + 1 : hi] - x0 * l1) / l0
    return out


def _nt_scaling(s, z, dims, m):
    """Dense Nesterov-Todd scaling matrices W, W^-1 and lambda = W z."""
    l, spans = _blocks(dims)
    W = np.zeros((m, m))
    Winv = np.zeros((m, m))
    lam = np.empty(m)
    if l:
        w = np.sqrt(s[:l] / z[:l])
        idx = np.arange(l)
        W[idx, idx] = w
        Winv[idx, idx] = 1.0 / w
        lam[:l] = np.sqrt(s[:l] * z[:l])
    for lo, hi in spans:
        sb, zb = s[lo:hi], z[lo:hi]
        d = hi - lo
        J = -np.eye(d)
        J[0, 0] = 1.0
        a = np.sqrt(max(sb[0] ** 2 - sb[1:] @ sb[1:], 1e-300))
        bb = np.sqrt(max(zb[0] ** 2 - zb[1:] @ zb[1:], 1e-300))
        sn, zn = sb / a, zb / bb
        gamma = np.sqrt((1.0 + sn @ zn) / 2.0)
        wbar = (sn + J @ zn) / (2.0 * gamma)
        v = (wbar + np.eye(d)[0]) / np.sqrt(2.0 * (1.0 + wbar[0]))
        eta = np.sqrt(a / bb)
        Wb = eta * (2.0 * np.outer(v, v) - J)
        Jv = J @ v
        W[lo:hi, lo:hi] = Wb
        Winv[lo:hi, lo:hi] = (2.0 * np.outer(Jv, Jv) - J) / eta
        lam[lo:hi] = Wb @ zb
    return W, Winv, lam


def _smallest_positive_root(quad_a, two_b, const_c):
    """Smallest positive root of a*t^2 + 2b*t + c = 0, or inf if none."""
    half_b = 0.5 * two_b
    if abs(quad_a) < 1e-300:
        if half_b >= 0:
            return np.inf
        return -const_c / two_b
    disc = half_b * half_b - quad_a * const_c
    if disc < 0:
        return np.inf
    sq = np.sqrt(disc)
    if half_b >= 0:
        q = -(half_b + sq)
    else:
        q = -(half_b - sq)
    roots = []
    if abs(quad_a) > 0:
        roots.append(q / quad_a)
    if abs(q) > 0:
        roots.append(const_c / q)
    positive = [r for r in roots if r > 0]
    return min(positive) if positive else np.inf


def _max_step(u, du, dims):
    """Largest t with u + t*du in the cone (u strictly interior)."""
    l, spans = _blocks(dims)
    step = np.inf
    if l:
        neg = du[:l] < 0
        if np.any(neg):
            step = float(np.min(-u[:l][neg] / du[:l][neg]))
    for lo, hi in spans:
        ub, db = u[lo:hi], du[lo:hi]
        quad_a = db[0] ** 2 - db[1:] @ db[1:]
        two_b = 2.0 * (ub[0] * db[0] - ub[1:] @ db[1:])
        const_c = ub[0] ** 2 - ub[1:] @ ub[1:]
        step = min(step, _smallest_positive_root(quad_a, two_b, const_c))
    return step


# ---------------------------------------------------------------------------
# the interior-point iteration


def _ipm(c, A, b, G, h, dims, tol: Tolerances):
    n = len(c)
    p = A.shape[0]
    m = G.shape[0]
    l, soc_dims = dims
    nu = l + len(soc_dims)

    if m == 0:
        return _solve_equality_only(c, A, b, tol)

    e = _identity_element(dims, m)
    x = np.zeros(n)
    y = np.zeros(p)
    s = e.copy()
    z = e.copy()

    norm_b = max(1.0, np.linalg.norm(b)) if p else 1.0
    norm_h = max(1.0, np.linalg.norm(h))
    norm_c = max(1.0, np.linalg.norm(c))

    for iteration in range(1, tol.max_iterations + 1):
        rx = c + A.T @ y + G.T @ z
        ry = A @ x - b
        rz = G @ x + s - h
        gap = float(s @ z)
        mu = gap / nu
        pres = max(
            np.linalg.norm(ry) / norm_b if p else 0.0,
            np.linalg.norm(rz) / norm_h,
        )
        dres = np.linalg.norm(rx) / norm_c
        pcost = float(c @ x)
        relgap = gap / max(1.0, abs(pcost))
        if pres <= tol.feasibility and dres <= tol.feasibility and relgap <= tol.optimality:
            return OPTIMAL, x, iteration
        if not np.isfinite(mu) or np.linalg.norm(z) > 1e14 or np.linalg.norm(s) > 1e14:
            return NUMERICAL_FAILURE, None, iteration

        W, Winv, lam = _nt_scaling(s, z, dims, m)
        W2 = W @ W
        K = np.zeros((n + p + m, n + p + m))
        K[:n, n : n + p] = A.T
        K[:n, n + p :] = G.T
        K[n : n + p, :n] = A
        K[n + p :, :n] = G
        K[n + p :, n + p :] = -W2
        solver = _kkt_solver(K, n, p)
        if solver is None:
            return NUMERICAL_FAILURE, None, iteration

        rhs_aff = np.concatenate([-rx, -ry, -rz + s])
        sol_aff = solver(rhs_aff)
        dx_a = sol_aff[:n]
        dz_a = sol_aff[n + p :]
        ds_a = -rz - G @ dx_a

        step_aff = min(1.0, _max_step(s, ds_a, dims), _max_step(z, dz_a, dims))
        mu_aff = float((s + step_aff * ds_a) @ (z + step_aff * dz_a)) / nu
        sigma = min(max(mu_aff / mu, 0.0) ** 3, 1.0)

        bs = _jprod(lam, lam, dims) + _jprod(Winv @ ds_a, W @ dz_a, dims) - sigma * mu * e
        rhs = np.concatenate([-rx, -ry, -rz + W @ _jsolve(lam, bs, dims)])
        sol = solver(rhs)
        dx = sol[:n]
        dy = sol[n : n + p]
        dz = sol[n + p :]
        ds = -rz - G @ dx

        step = min(1.0, 0.99 * min(_max_step(s, ds, dims), _max_step(z, dz, dims)))
        if step <= 1e-13:
            return NUMERICAL_FAILURE, None, iteration
        x = x + step * dx
        y = y + step * dy
        s = s + step * ds
        z = z + step * dz

    return ITERATION_LIMIT, None, tol.max_iterations


def _kkt_solver(K, n, p):
    """LU-backed solve with one refinement step; regularized retry if singular."""
    try:
        lu = scipy.linalg.lu_factor(K)
    except scipy.linalg.LinAlgError:
        reg = np.zeros(K.shape[0])
        reg[:n] = 1e-10
        reg[n:] = -1e-10
        try:
            lu = scipy.linalg.lu_factor(K + np.diag(reg))
        except scipy.linalg.LinAlgError:
            return None

    def solver(rhs):
        sol = scipy.linalg.lu_solve(lu, rhs)
        sol += scipy.linalg.lu_solve(lu, rhs - K @ sol)
        return sol

    return solver


def _solve_equality_only(c, A, b, tol: Tolerances):
    """No cone part at all: stationarity c + A'y = 0 with Ax = b."""
    n = len(c)
    p = A.shape[0]
    K = np.zeros((n + p, n + p))
    K[:n, n:] = A.T
    K[n:, :n] = A
    rhs = np.concatenate([-c, b])
    sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    x = sol[:n]
    if p and np.linalg.norm(A @ x - b) > tol.feasibility * max(1.0, np.linalg.norm(b)):
        return NUMERICAL_FAILURE, None, 1
    y = sol[n:]
    if np.linalg.norm(c + A.T @ y) > 1e-6 * max(1.0, np.linalg.norm(c)):
        return NUMERICAL_FAILURE, None, 1
    return OPTIMAL, x, 1
