"""Greedy optimal-input design: initialization, fitting sweeps and splitting.

The driver designs one control per accepted basis candidate.  Position 0
is filled by the initialization problem (discriminating each candidate
against the zero nonlinearity); afterwards the loop alternates a fitting
sweep (for every remaining candidate, fit coefficients on the already
selected elements that best mimic the candidate's states under the current
controls) and a splitting step (find the control that maximally separates
the fitted surrogate from its candidate).  The winning candidate is swapped
into the next position.  The loop stops when the discrimination value
f_max falls to tol1 or the basis is exhausted.

Per-candidate subproblems are independent; they receive independent seeded
random streams keyed by (stage, iteration, candidate position) so that
sequential and concurrent execution produce identical results.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from .exceptions import GreedyFailure, NumericalError
from .forward import FixedPointConfig
from .objectives import (
    ControlBox,
    DiscriminationObjective,
    FittingObjective,
    SolverContext,
    control_to_vec,
    vec_to_control,
)
from .optimize import OptimConfig, multistart_maximize, multistart_minimize

_STAGE_INIT = 1
_STAGE_FIT = 2
_STAGE_SPLIT = 3
_STAGE_IDENTIFY = 4


def stage_rng(seed: int, stage: int, iteration: int, candidate: int) -> np.random.Generator:
    """Independent stream per (stage, iteration, candidate), order-invariant."""
    return np.random.default_rng(
        np.random.SeedSequence([int(seed), stage, iteration, candidate])
    )


@dataclass(frozen=True)
class GreedyConfig:
    box: ControlBox = ControlBox((-1.0, -1.0), (1.0, 1.0))
    fp: FixedPointConfig = FixedPointConfig()
    optim_coeff: OptimConfig = OptimConfig(grad_tol=1e-8, restarts=1)
    optim_control: OptimConfig = OptimConfig(grad_tol=1e-6, max_iters=80, restarts=1)
    tol1: float = float(np.finfo(float).eps)
    nu: float = 1e-6
    alpha_max: float = 1.0
    reg_sign: int = 1
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.tol1 <= 0:
            raise ValueError("tol1 must be positive")
        if self.nu < 0 or self.alpha_max < 0:
            raise ValueError("nu and alpha_max must be nonnegative")
        if self.reg_sign not in (1, -1):
            raise ValueError("reg_sign must be +1 or -1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass
class GreedyRun:
    basis: object
    controls: list
    betas: dict
    f_max_history: list
    winners: list
    swaps: list
    k_final: int
    stopped_by: str
    progress: list = dc_field(default_factory=list)


def _map_candidates(fn, candidates, threads):
    if threads > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(fn, candidates))
    else:
        results = [fn(c) for c in candidates]
    return dict(zip(candidates, results))


def _discrimination_value(ctx: SolverContext, beta, candidate_pos, control) -> float:
    """Misfit-only score 1/2 ||y^beta - y^cand||^2 from two fresh solves."""
    y_b = ctx.solve(ctx.combo(np.asarray(beta, float)), control)
    y_c = ctx.solve(ctx.unit(candidate_pos), control)
    diff = y_b - y_c
    return 0.5 * ctx.grid.h**2 * float(np.sum(diff * diff))


# scores within this relative band count as equal and the lowest candidate
# position wins; symmetric candidate pairs (e.g. the two linear monomials
# under equal couplings) have exactly equal optima that solvers only
# resolve to roundoff
WINNER_TIE_REL = 1e-6


def _select_winner(scores: dict) -> int:
    viable = {c: s for c, s in scores.items() if s is not None}
    best = max(viable.values())
    band = WINNER_TIE_REL * abs(best)
    return min(c for c, s in viable.items() if s >= best - band)


def control_optim_config(cfg: GreedyConfig, grid) -> OptimConfig:
    """Control-space optimizer settings with a mesh-consistent tolerance.

    Gradients with respect to nodal control values carry the quadrature
    weight h^2, so a flat Euclidean tolerance would be mesh-dependent;
    ``grad_tol`` is interpreted in the L2-representer scale and converted
    to the flat scale by one factor of h.
    """
    return replace(cfg.optim_control, grad_tol=cfg.optim_control.grad_tol * grid.h)


def _constant_start(grid, pair) -> np.ndarray:
    m = grid.n - 1
    field = np.empty((2, m, m))
    field[0] = pair[0]
    field[1] = pair[1]
    return field.reshape(-1)


def _optimize_discrimination(ctx, beta, cand, cfg, starts, rng):
    obj = DiscriminationObjective(ctx, beta, cand, cfg.nu, cfg.reg_sign)

    def score(x, need_grad=True):
        ev = obj(x, need_grad)
        return ev._replace(value=-ev.value, grad=None if ev.grad is None else -ev.grad)

    lo, hi = cfg.box.flat_bounds(ctx.grid)
    # restart points are random CONSTANT controls: uniform nodal noise is
    # smoothed away by the solve and makes a poor start at fine meshes,
    # while the informative controls are smooth and large-scale
    starts = list(starts)
    starts += [_constant_start(ctx.grid, cfg.box.sample_constant(rng))
               for _ in range(cfg.optim_control.restarts)]
    return multistart_maximize(score, starts, lo, hi,
                               control_optim_config(cfg, ctx.grid), rng,
                               n_random=0)


def run_initialization(ctx: SolverContext, cfg: GreedyConfig):
    """Pick the most distinguishable candidate and its control; swap it to
    position 0.  Returns (control, winner position, f_max, progress record)."""
    size = ctx.basis.size
    zero_start = np.zeros(2 * (ctx.grid.n - 1) ** 2)
    scores = {}

    def attempt(cand):
        rng = stage_rng(cfg.seed, _STAGE_INIT, 0, cand)
        try:
            return _optimize_discrimination(ctx, np.zeros(0), cand, cfg,
                                            [zero_start], rng)
        except NumericalError:
            return None

    results = _map_candidates(attempt, list(range(size)), cfg.threads)
    for cand, res in results.items():
        scores[cand] = None if res is None else res.value
    if all(s is None for s in scores.values()):
        raise GreedyFailure("every initialization candidate failed")
    winner = _select_winner(scores)
    control = vec_to_control(ctx.grid, results[winner].x)
    f_max = _discrimination_value(ctx, np.zeros(0), winner, control)
    ctx.basis.swap(0, winner)
    record = {"stage": "initialization", "k": 0, "scores": scores,
              "winner": winner, "f_max": f_max}
    return control, winner, f_max, record


def fitting_targets(ctx: SolverContext, candidate_pos: int, controls, cache=None):
    """States of the candidate's single-element nonlinearity under each control."""
    exp = ctx.basis.exponent(candidate_pos)
    targets = []
    for m, eps in enumerate(controls):
        key = (exp, m)
        if cache is not None and key in cache:
            targets.append(cache[key])
            continue
        state = ctx.solve(ctx.unit(candidate_pos), eps)
        if cache is not None:
            cache[key] = state
        targets.append(state)
    return targets


def run_fitting_sweep(ctx: SolverContext, k: int, controls, cfg: GreedyConfig,
                      cache=None):
    """Fit coefficients on the first k elements for every remaining candidate.

    Returns {candidate position: fitted coefficient vector of length k}.
    """
    size = ctx.basis.size
    if not (1 <= k <= size - 1):
        raise ValueError(f"fitting sweep needs 1 <= k <= K-1, got k={k}")
    if len(controls) != k:
        raise ValueError("need exactly k controls")
    lo = np.zeros(k)
    hi = np.full(k, cfg.alpha_max)
    # synthesize all targets up front (shared cache, sequential)
    all_targets = {c: fitting_targets(ctx, c, controls, cache)
                   for c in range(k, size)}

    def attempt(cand):
        rng = stage_rng(cfg.seed, _STAGE_FIT, k, cand)
        try:
            obj = FittingObjective(ctx, controls, all_targets[cand], cfg.nu)
            return multistart_minimize(obj, [np.zeros(k)], lo, hi,
                                       cfg.optim_coeff, rng)
        except NumericalError:
            return None

    results = _map_candidates(attempt, list(range(k, size)), cfg.threads)
    betas = {c: r.x for c, r in results.items() if r is not None}
    if not betas:
        raise GreedyFailure(f"every fitting subproblem failed at k={k}")
    return betas


def run_splitting(ctx: SolverContext, k: int, betas: dict, cfg: GreedyConfig,
                  prev_control=None):
    """Find the next control and candidate; swap the winner to position k.

    Returns (control, winner position, f_max, progress record)."""
    zero_start = np.zeros(2 * (ctx.grid.n - 1) ** 2)
    starts = [zero_start]
    if prev_control is not None:
        starts.append(control_to_vec(prev_control))

    def attempt(cand):
        rng = stage_rng(cfg.seed, _STAGE_SPLIT, k, cand)
        try:
            return _optimize_discrimination(ctx, betas[cand], cand, cfg, starts, rng)
        except NumericalError:
            return None

    results = _map_candidates(attempt, sorted(betas.keys()), cfg.threads)
    scores = {c: (None if r is None else r.value) for c, r in results.items()}
    if all(s is None for s in scores.values()):
        raise GreedyFailure(f"every splitting subproblem failed at k={k}")
    winner = _select_winner(scores)
    control = vec_to_control(ctx.grid, results[winner].x)
    f_max = _discrimination_value(ctx, betas[winner], winner, control)
    ctx.basis.swap(k, winner)
    record = {"stage": "splitting", "k": k, "scores": scores,
              "winner": winner, "f_max": f_max}
    return control, winner, f_max, record


def run_greedy(ctx: SolverContext, cfg: GreedyConfig) -> GreedyRun:
    """Full greedy sweep; returns the reordered basis and all designed controls."""
    size = ctx.basis.size
    progress = []
    try:
        control, winner, f_max, record = run_initialization(ctx, cfg)
    except GreedyFailure as exc:
        exc.partial = GreedyRun(ctx.basis, [], {}, [], [], [], 0, "failed", progress)
        raise
    controls = [control]
    f_hist = [f_max]
    winners = [winner]
    swaps = [(0, winner)]
    progress.append(record)
    betas_last = {}
    target_cache = {}
    k = 1
    while k <= size - 1 and f_max > cfg.tol1:
        try:
            betas = run_fitting_sweep(ctx, k, controls, cfg, cache=target_cache)
            control, winner, f_max, record = run_splitting(
                ctx, k, betas, cfg, prev_control=controls[-1])
        except GreedyFailure as exc:
            exc.partial = GreedyRun(ctx.basis, controls, betas_last, f_hist,
                                    winners, swaps, k, "failed", progress)
            raise
        controls.append(control)
        f_hist.append(f_max)
        winners.append(winner)
        swaps.append((k, winner))
        progress.append(record)
        betas_last = betas
        k += 1
    stopped_by = "tol1" if f_max <= cfg.tol1 else "exhausted"
    return GreedyRun(ctx.basis, controls, betas_last, f_hist, winners, swaps,
                     len(controls), stopped_by, progress)
