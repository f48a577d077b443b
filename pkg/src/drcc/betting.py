"""Correlated-wager benchmark for the chance-constrained stake problem.

Stakes are placed on four wagers spread over two independent games.  Within
a game every wager reads the same uniform draw, so wins are nested: the
longer-odds wager can only pay out when the shorter-odds one already has.
The stake vector maximizes expected payout subject to a chance constraint
on large losses, a unit budget, and nonnegativity.

Besides the conic route, `solve_reference` scans a simplex grid and checks
the closed-form constraint directly, giving an independent answer to
compare solver output against.
"""

import csv
import hashlib
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import conic, moments, schedules, supports, surrogate

LOSS_BETA = "loss_beta"
GAIN_BETA = "gain_beta"
NOT_ENOUGH_SAMPLES = "not_enough_samples"

FULL_N_GRID = (50, 100, 200, 1000, 10000)
FULL_TRIALS = 200
FULL_TEST_SIZE = 100_000

TRIAL_COLUMNS = ("method", "N", "trial", "seed", "status", "reward",
                 "violation", "time_ms", "x1", "x2", "x3", "x4")
AGGREGATE_COLUMNS = ("method", "N", "avg_reward", "max_violation",
                     "feasible_fraction")
SEQUENTIAL_COLUMNS = ("method", "step", "count", "status", "objective",
                      "time_ms", "x1", "x2", "x3", "x4")


@dataclass(frozen=True)
class BettingConfig:
    """Wager table plus the risk knobs of the stake problem.

    `threshold_mode` picks the loss event: "loss_beta" bounds the chance of
    losing more than beta (payout below -beta), "gain_beta" bounds the chance
    of the payout falling short of +beta.  The latter makes the zero stake
    itself a violation.
    """

    rho: tuple = (0.75, 0.6, 0.7, 0.4)
    abar: tuple = (0.5, 0.95, 0.6, 2.1)
    alpha: float = 0.2
    beta: float = 0.1
    threshold_mode: str = LOSS_BETA
    games: int = 2
    wagers_per_game: int = 2

    def __post_init__(self):
        rho = tuple(float(v) for v in self.rho)
        abar = tuple(float(v) for v in self.abar)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "abar", abar)
        expected = self.games * self.wagers_per_game
        if self.games < 1 or self.wagers_per_game < 1:
            raise ValueError("need at least one game and one wager per game")
        if len(rho) != expected or len(abar) != expected:
            raise ValueError(
                f"rho and abar must list {expected} wagers, "
                f"got {len(rho)} and {len(abar)}"
            )
        if any(not 0.0 < v < 1.0 for v in rho):
            raise ValueError("win probabilities must lie strictly in (0, 1)")
        if any(v <= 0.0 for v in abar):
            raise ValueError("winning payouts must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly in (0, 1)")
        if self.beta <= 0.0:
            raise ValueError("beta must be positive")
        if self.threshold_mode not in (LOSS_BETA, GAIN_BETA):
            raise ValueError(
                f"threshold_mode must be {LOSS_BETA!r} or {GAIN_BETA!r}"
            )

    @property
    def num_wagers(self) -> int:
        return self.games * self.wagers_per_game


@dataclass(frozen=True)
class TrialResult:
    method: str
    n: int
    trial: int
    seed: int
    status: str
    x: tuple
    reward: float
    violation: float
    time_ms: float


@dataclass(frozen=True)
class AggregateRow:
    method: str
    n: int
    avg_reward: float
    max_violation: float
    feasible_fraction: float


@dataclass(frozen=True)
class StepResult:
    method: str
    step: int
    count: int
    status: str
    x: tuple
    objective: float
    time_ms: float


@dataclass(frozen=True)
class ReferenceSolution:
    x: np.ndarray
    objective: float
    feasible: bool


def wager_outcome(u: float, rho: float, abar: float) -> float:
    """Payout of one wager given its game's uniform draw.

    The wager pays `abar` when u >= 1 - rho (the boundary draw wins) and
    loses the unit stake otherwise.
    """
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"uniform draw must lie in [0, 1], got {u}")
    return abar if u >= 1.0 - rho else -1.0


def _outcomes(cfg: BettingConfig, draws: np.ndarray) -> np.ndarray:
    out = np.empty((draws.shape[0], cfg.num_wagers))
    for k in range(cfg.num_wagers):
        game = k // cfg.wagers_per_game
        out[:, k] = np.where(draws[:, game] >= 1.0 - cfg.rho[k],
                             cfg.abar[k], -1.0)
    return out


def sample_batch(cfg: BettingConfig, seed: int, count: int) -> np.ndarray:
    """Draw `count` joint outcome rows, one uniform draw per game."""
    rng = np.random.default_rng(int(seed))
    return _outcomes(cfg, rng.random((count, cfg.games)))


def true_moments(cfg: BettingConfig):
    """Exact mean and covariance of the outcome vector.

    Each game's outcome map is piecewise constant in its uniform draw, so
    the moments are interval sums over the threshold partition of [0, 1].
    Games are independent, which leaves the cross blocks identically zero.
    """
    n = cfg.num_wagers
    w = cfg.wagers_per_game
    mu = np.zeros(n)
    sigma = np.zeros((n, n))
    for game in range(cfg.games):
        cols = slice(game * w, (game + 1) * w)
        thresholds = np.array([1.0 - cfg.rho[k]
                               for k in range(game * w, (game + 1) * w)])
        payouts = np.array(cfg.abar[cols])
        breaks = sorted({0.0, 1.0, *thresholds.tolist()})
        mean_g = np.zeros(w)
        second_g = np.zeros((w, w))
        for left, right in zip(breaks[:-1], breaks[1:]):
            length = right - left
            values = np.where(thresholds <= left, payouts, -1.0)
            mean_g += length * values
            second_g += length * np.outer(values, values)
        mu[cols] = mean_g
        sigma[cols, cols] = second_g - np.outer(mean_g, mean_g)
    return mu, sigma


def chance_spec(cfg: BettingConfig) -> surrogate.ChanceSpec:
    """Loss event written as a nonpositivity requirement on a'(Mx) + d."""
    offset = -cfg.beta if cfg.threshold_mode == LOSS_BETA else cfg.beta
    return surrogate.ChanceSpec(-np.eye(cfg.num_wagers), offset, cfg.alpha)


def support_box(cfg: BettingConfig) -> supports.Box:
    """Outcome support: each wager pays either -1 or its winning payout."""
    return supports.Box(-np.ones(cfg.num_wagers), cfg.abar)


def loss_threshold(cfg: BettingConfig) -> float:
    return -cfg.beta if cfg.threshold_mode == LOSS_BETA else cfg.beta


def evaluate(x, samples: np.ndarray, cfg: BettingConfig):
    """Out-of-sample reward mean and loss-event frequency of a stake."""
    x = np.asarray(x, dtype=float)
    payouts = samples @ x
    reward = float(payouts.mean())
    violation = float(np.mean(payouts < loss_threshold(cfg)))
    return reward, violation


def _parse_method(method: str):
    if method in ("oracle", "plugin", "robust"):
        return method, None
    if method.startswith("robust:"):
        return "robust_p", float(method.split(":", 1)[1])
    if method.startswith("fixed:"):
        return "fixed", float(method.split(":", 1)[1])
    raise ValueError(f"unknown benchmark method {method!r}")


def build_blocks(cfg: BettingConfig, method: str, state):
    """Surrogate blocks plus the objective mean for one method tag.

    Tags: "oracle" (true moments), "plugin" (sample moments, no widening),
    "robust" (sample-size schedule with automatic decay exponent),
    "robust:P" (explicit exponent P), "fixed:D" (fixed-confidence bounds
    at level D).  Data methods read the streaming state; "oracle" ignores
    it.  Raises NotEnoughSamples when the schedule cannot certify at the
    state's sample count.
    """
    kind, param = _parse_method(method)
    spec = chance_spec(cfg)
    if kind == "oracle":
        mu, sigma = true_moments(cfg)
        return surrogate.build_known(mu, sigma, spec), mu
    mean = state.extract().mean
    if kind == "plugin":
        return surrogate.build_plugin(state, spec), mean
    if kind == "robust":
        sched = schedules.schedule_cov_auto(state.count, cfg.alpha)
        return surrogate.build_robust(state, support_box(cfg), spec, sched), mean
    if kind == "robust_p":
        sched = schedules.schedule_cov(state.count, cfg.alpha, param)
        return surrogate.build_robust(state, support_box(cfg), spec, sched), mean
    blocks = surrogate.build_fixed_confidence(state, support_box(cfg), spec, param)
    return blocks, mean


def assemble_problem(cfg: BettingConfig, blocks, objective_mu) -> conic.ConicProgram:
    """Stake program: maximize expected payout on the capped simplex."""
    n = cfg.num_wagers
    return surrogate.assemble_program(
        blocks,
        objective_mu,
        sense="max",
        extra_rows=[(np.ones(n), "<=", 1.0)],
        lower_bounds=np.zeros(n),
    )


def _solve_stake(cfg: BettingConfig, method: str, state):
    """One build-and-solve pass; infeasibility collapses to the zero stake."""
    n = cfg.num_wagers
    try:
        blocks, mu = build_blocks(cfg, method, state)
        sol = conic.solve(assemble_problem(cfg, blocks, mu))
        if sol.status == conic.OPTIMAL:
            return np.clip(sol.x[:n], 0.0, None), conic.OPTIMAL, float(sol.objective)
        return np.zeros(n), sol.status, 0.0
    except surrogate.NotEnoughSamples:
        return np.zeros(n), NOT_ENOUGH_SAMPLES, 0.0


def derive_seed(master_seed: int, label: str, n: int, trial: int) -> int:
    """Stable per-task seed: hash of the run seed and the task coordinates."""
    digest = hashlib.sha256(
        f"{master_seed}|{label}|{n}|{trial}".encode()
    ).digest()
    return int.from_bytes(digest[:8], "little")


def _run_chunk(cfg, method, n, trials_per_n, master_seed, test_samples):
    results = []
    if method == "oracle":
        start = time.perf_counter()
        x, status, _ = _solve_stake(cfg, method, None)
        elapsed = (time.perf_counter() - start) * 1e3
        reward, violation = evaluate(x, test_samples, cfg)
        stake = tuple(float(v) for v in x)
        for trial in range(trials_per_n):
            results.append(TrialResult(method, n, trial, 0, status, stake,
                                       reward, violation, elapsed))
        return results
    for trial in range(trials_per_n):
        seed = derive_seed(master_seed, method, n, trial)
        samples = sample_batch(cfg, seed, n)
        start = time.perf_counter()
        state = moments.MomentState(cfg.num_wagers)
        state.update_many(samples)
        x, status, _ = _solve_stake(cfg, method, state)
        elapsed = (time.perf_counter() - start) * 1e3
        reward, violation = evaluate(x, test_samples, cfg)
        results.append(TrialResult(method, n, trial, seed, status,
                                   tuple(float(v) for v in x),
                                   reward, violation, elapsed))
    return results


def _run_chunk_remote(args):
    cfg, method, n, trials_per_n, master_seed, test_seed, test_size = args
    test_samples = sample_batch(cfg, test_seed, test_size)
    return _run_chunk(cfg, method, n, trials_per_n, master_seed, test_samples)


def run_experiment(cfg: BettingConfig, methods, n_grid, trials_per_n,
                   test_size=FULL_TEST_SIZE, master_seed=2026, workers=1):
    """Monte Carlo sweep over methods and sample counts.

    Every (method, N, trial) cell draws its own training batch from a seed
    derived off `master_seed`, fits the surrogate, solves for a stake, and
    scores it on one shared held-out test set.  Cells whose schedule or
    solve fails are recorded with the zero stake and a non-"optimal"
    status rather than dropped.  Results are bit-reproducible for a given
    master seed regardless of `workers`.
    """
    methods = list(methods)
    for method in methods:
        _parse_method(method)
    n_grid = [int(n) for n in n_grid]
    test_seed = derive_seed(master_seed, "test-set", test_size, 0)
    tasks = [(method, n) for method in methods for n in n_grid]
    if workers <= 1:
        test_samples = sample_batch(cfg, test_seed, test_size)
        results = []
        for method, n in tasks:
            results.extend(_run_chunk(cfg, method, n, trials_per_n,
                                      master_seed, test_samples))
        return results
    args = [(cfg, method, n, trials_per_n, master_seed, test_seed, test_size)
            for method, n in tasks]
    results = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for chunk in pool.map(_run_chunk_remote, args):
            results.extend(chunk)
    return results


def aggregate(results):
    """Per-(method, N) reward mean, worst violation, and feasible share."""
    order = []
    groups = {}
    for r in results:
        key = (r.method, r.n)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(r)
    rows = []
    for method, n in order:
        group = groups[(method, n)]
        rows.append(AggregateRow(
            method=method,
            n=n,
            avg_reward=float(np.mean([r.reward for r in group])),
            max_violation=float(max(r.violation for r in group)),
            feasible_fraction=float(np.mean(
                [r.status == conic.OPTIMAL for r in group]
            )),
        ))
    return rows


def run_sequential(cfg: BettingConfig, method: str, steps: int,
                   samples_per_step: int, master_seed=2026):
    """Stream batches into one moment state, re-solving after each batch.

    Returns one row per step with the cumulative count, solve status,
    stake, and the wall time of that step's update-build-solve cycle.
    Steps whose schedule cannot certify yet carry the zero stake and move
    on; later steps recover once the count crosses the threshold.
    """
    _parse_method(method)
    if steps < 1 or samples_per_step < 1:
        raise ValueError("steps and samples_per_step must be positive")
    rng = np.random.default_rng(
        derive_seed(master_seed, f"sequential|{method}", samples_per_step, steps)
    )
    state = moments.MomentState(cfg.num_wagers)
    rows = []
    for step in range(1, steps + 1):
        draws = rng.random((samples_per_step, cfg.games))
        start = time.perf_counter()
        state.update_many(_outcomes(cfg, draws))
        x, status, objective = _solve_stake(cfg, method, state)
        elapsed = (time.perf_counter() - start) * 1e3
        rows.append(StepResult(method, step, state.count, status,
                               tuple(float(v) for v in x), objective, elapsed))
    return rows


def _triangle_index(levels: int):
    """Grid points of {(i, j) >= 0 : i + j <= levels}, sorted by i + j."""
    i, j = np.meshgrid(np.arange(levels + 1), np.arange(levels + 1),
                       indexing="ij")
    i = i.ravel()
    j = j.ravel()
    keep = i + j <= levels
    i = i[keep]
    j = j[keep]
    order = np.argsort(i + j, kind="stable")
    i = i[order]
    j = j[order]
    upto = np.cumsum(np.bincount(i + j, minlength=levels + 1))
    return i, j, upto


def solve_reference(cfg: BettingConfig, blocks, objective_mu, step=0.005,
                    feas_tol=1e-9) -> ReferenceSolution:
    """Grid-scan the capped simplex, checking the closed-form constraint.

    This bypasses both the lifted rows and the interior-point solver: each
    grid stake is tested against the surrogate's scalar margin and the
    best feasible objective wins.  Returns the zero stake with
    `feasible=False` when no grid point passes.
    """
    if blocks.decision_dim != cfg.num_wagers:
        raise ValueError("blocks do not match the wager count")
    if cfg.num_wagers != 4:
        raise ValueError("the grid reference scan expects four wagers")
    levels = int(round(1.0 / step))
    if levels < 1 or abs(levels * step - 1.0) > 1e-9:
        raise ValueError(f"step {step} must divide the unit budget evenly")
    mu = np.asarray(objective_mu, dtype=float)
    i3, i4, upto = _triangle_index(levels)
    tail = np.column_stack([i3, i4]).astype(float) * step
    buffer = np.empty((tail.shape[0], 4))
    best_objective = -np.inf
    best_x = None
    for a in range(levels + 1):
        for b in range(levels + 1 - a):
            k = int(upto[levels - a - b])
            points = buffer[:k]
            points[:, 0] = a * step
            points[:, 1] = b * step
            points[:, 2:] = tail[:k]
            margins = surrogate.constraint_margin_batch(blocks, points)
            feasible = margins <= feas_tol
            if not feasible.any():
                continue
            objectives = points[feasible] @ mu
            pick = int(np.argmax(objectives))
            if objectives[pick] > best_objective:
                best_objective = float(objectives[pick])
                best_x = points[feasible][pick].copy()
    if best_x is None:
        return ReferenceSolution(np.zeros(4), 0.0, False)
    return ReferenceSolution(best_x, best_objective, True)


def _format(value) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format(v) for v in row])


def write_trials_csv(results, path):
    _write_rows(path, TRIAL_COLUMNS, (
        (r.method, r.n, r.trial, r.seed, r.status, r.reward, r.violation,
         r.time_ms, *r.x)
        for r in results
    ))


def write_aggregate_csv(rows, path):
    _write_rows(path, AGGREGATE_COLUMNS, (
        (r.method, r.n, r.avg_reward, r.max_violation, r.feasible_fraction)
        for r in rows
    ))


def write_sequential_csv(rows, path):
    _write_rows(path, SEQUENTIAL_COLUMNS, (
        (r.method, r.step, r.count, r.status, r.objective, r.time_ms, *r.x)
        for r in rows
    ))
