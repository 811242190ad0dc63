"""One CMA-ES descent.

Implements parameter derivation, batched population sampling, ranked
selection, evolution-path and step-size updates, covariance adaptation in
the matrix-product form, lazy eigendecomposition, stopping criteria, and
the iteration driver that ties them together.

The covariance update is evaluated as

    C <- (1 - c_mu - c_1) * C  +  c_mu * A @ W  +  c_1 * p_c p_c^T

where A's columns are the selected displacement vectors y_i and W's rows
are w_i * y_i^T, which is algebraically identical to the textbook
per-point form  C + c_mu * sum_i w_i (y_i y_i^T - C) + c_1 (p_c p_c^T - C)
whenever the weights sum to one, but costs one matrix-matrix product
instead of mu rank-one sweeps. Sampling is likewise batched:
X = m 1^T + sigma * B diag(D) Z for all lambda points at once.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import linalg
from .errors import ConfigError, ContractError, NumericError, ShapeError
from .runlog import RunLog, RunRecord, StopReason

__all__ = [
    "CmaParams",
    "CmaState",
    "Population",
    "DescentLimits",
    "SequentialEvaluator",
    "derive_params",
    "init_state",
    "sample_population",
    "rank_qualities",
    "adapt_covariance",
    "update",
    "maybe_eigendecompose",
    "check_stop",
    "run_descent",
]

# Stopping thresholds (fixed; see check_stop for the evaluation order).
_TOLFUN = 1e-12
_TOLX_REL = 1e-11
_COND_LIMIT = 1e14


@dataclass(frozen=True)
class CmaParams:
    """Per-descent strategy constants.

    Attributes
    ----------
    n : int
        Search-space dimension.
    lam : int
        Population size (points sampled per iteration).
    mu : int
        Number of selected parents, floor(lam / 2).
    weights : np.ndarray
        mu positive recombination weights, strictly decreasing, summing
        to one.
    mu_eff : float
        Variance-effective selection mass, 1 / sum(weights**2).
    c_sigma, d_sigma : float
        Learning rate and damping for step-size control.
    c_c : float
        Learning rate for the covariance evolution path.
    c_1, c_mu : float
        Rank-one and rank-mu covariance learning rates.
    chi_n : float
        Expected norm of an n-dimensional standard normal vector.
    """

    n: int
    lam: int
    mu: int
    weights: np.ndarray
    mu_eff: float
    c_sigma: float
    d_sigma: float
    c_c: float
    c_1: float
    c_mu: float
    chi_n: float

    def tolfun_window(self) -> int:
        """History length over which a flat best-quality range stops."""
        return 10 + math.ceil(30 * self.n / self.lam)

    def stagnation_window(self) -> int:
        """History length for the median-based stagnation test."""
        return 100 + math.ceil(100 * self.n ** 1.5 / self.lam)

    def eigen_period_evals(self) -> int:
        """Evaluations between eigendecompositions (lazy-refresh policy)."""
        rate = self.c_1 + self.c_mu
        return self.lam * max(1, int(1.0 / (10.0 * self.n * rate)))


def derive_params(n: int, lam: int) -> CmaParams:
    """Default strategy constants for dimension n and population lam.

    The formulas are the standard defaults of the reference CMA-ES
    implementations; the optimizer takes them as given.
    """
    if n < 1:
        raise ConfigError(f"dimension must be >= 1, got {n}")
    if lam < 2:
        raise ConfigError(f"population size must be >= 2, got {lam}")
    mu = lam // 2
    raw = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw / raw.sum()
    mu_eff = 1.0 / float(np.sum(weights ** 2))
    c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0)
    d_sigma = 1.0 + 2.0 * max(0.0, math.sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + c_sigma
    c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n)
    c_1 = 2.0 / ((n + 1.3) ** 2 + mu_eff)
    c_mu = min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0) ** 2 + mu_eff))
    chi_n = math.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))
    return CmaParams(
        n=n,
        lam=lam,
        mu=mu,
        weights=weights,
        mu_eff=mu_eff,
        c_sigma=c_sigma,
        d_sigma=d_sigma,
        c_c=c_c,
        c_1=c_1,
        c_mu=c_mu,
        chi_n=chi_n,
    )


@dataclass
class CmaState:
    """Evolving search state of one descent (single-owner, mutable)."""

    m: np.ndarray
    c: np.ndarray
    sigma: float
    p_sigma: np.ndarray
    p_c: np.ndarray
    b: np.ndarray
    d: np.ndarray
    eval_count: int
    iter_count: int
    evals_since_eigen: int
    best_x: np.ndarray | None
    best_f: float
    recent_best: deque
    stagnation_hist: deque
    sigma0: float
    seed: int


def init_state(params: CmaParams, m0, sigma0: float, rng_seed: int) -> CmaState:
    """Fresh descent state: identity covariance, zero paths, zero counters."""
    if sigma0 <= 0.0:
        raise ConfigError(f"sigma0 must be positive, got {sigma0}")
    m = linalg.as_vector(m0, "m0").copy()
    if m.shape[0] != params.n:
        raise ShapeError(f"m0 length {m.shape[0]} vs dimension {params.n}")
    n = params.n
    return CmaState(
        m=m,
        c=np.eye(n),
        sigma=float(sigma0),
        p_sigma=np.zeros(n),
        p_c=np.zeros(n),
        b=np.eye(n),
        d=np.ones(n),
        eval_count=0,
        iter_count=0,
        evals_since_eigen=0,
        best_x=None,
        best_f=math.inf,
        recent_best=deque(maxlen=params.tolfun_window()),
        stagnation_hist=deque(maxlen=params.stagnation_window()),
        sigma0=float(sigma0),
        seed=int(rng_seed),
    )


@dataclass
class Population:
    """One iteration's sample batch.

    Z holds the standard-normal draws (columns z_k), X the candidate
    points, Y the displacements (x_k - m) / sigma. qualities and ranking
    are filled by evaluation and ranking respectively.
    """

    z: np.ndarray
    x: np.ndarray
    y: np.ndarray
    qualities: np.ndarray | None = None
    ranking: np.ndarray | None = None


def sample_population(state: CmaState, params: CmaParams, rng: np.random.Generator) -> Population:
    """Draw all lambda candidates at once: X = m 1^T + sigma * B diag(D) Z.

    Draw order is deterministic: each column's n entries are drawn
    consecutively, columns in index order (z_1 first), so a per-vector
    sampler given the same generator produces the same Z.
    """
    n, lam = params.n, params.lam
    z = np.ascontiguousarray(rng.standard_normal((lam, n)).T)
    bdz = linalg.gemm(1.0, state.b, state.d[:, None] * z)
    x = state.m[:, None] + state.sigma * bdz
    y = (x - state.m[:, None]) / state.sigma
    return Population(z=z, x=x, y=y)


def rank_qualities(qualities) -> np.ndarray:
    """Ascending stable ranking; non-finite qualities rank strictly worst.

    Ties (including between non-finite entries) are broken by sample
    index, which keeps the ranking total and reproducible.
    """
    q = np.asarray(qualities, dtype=np.float64).ravel()
    keys = np.where(np.isfinite(q), q, np.inf)
    return np.argsort(keys, kind="stable")


def adapt_covariance(c, p_c, y_ranked, params: CmaParams) -> np.ndarray:
    """Covariance update in the single-product form (see module docstring).

    y_ranked's columns must be the displacements of the mu best points in
    rank order. The result is exactly symmetrized.
    """
    cm = linalg.as_matrix(c, "C")
    n = cm.shape[0]
    ys = linalg.as_matrix(y_ranked, "Y_ranked")
    if cm.shape[1] != n:
        raise ShapeError(f"adapt_covariance: C must be square, got {cm.shape}")
    if ys.shape != (n, params.mu):
        raise ShapeError(
            f"adapt_covariance: Y_ranked shape {ys.shape}, expected {(n, params.mu)}"
        )
    decay = 1.0 - params.c_mu - params.c_1
    weighted = params.weights[:, None] * ys.T  # rows are w_i * y_i^T
    out = linalg.gemm(params.c_mu, ys, weighted, decay, cm)
    out = linalg.syr1(out, linalg.as_vector(p_c, "p_c"), params.c_1)
    return 0.5 * (out + out.T)


def update(state: CmaState, params: CmaParams, pop: Population) -> CmaState:
    """One full state transition from an evaluated population.

    Steps, in order: rank; recombine the mean; update the sigma path;
    gate the covariance path on the sigma-path norm; update the
    covariance path; adapt the covariance; adapt sigma; advance counters,
    incumbent, and the quality histories. The state is modified in place
    and returned.
    """
    if pop.qualities is None:
        raise ContractError("update: population not evaluated")
    q = np.asarray(pop.qualities, dtype=np.float64).ravel()
    if q.shape[0] != params.lam:
        raise ShapeError(f"update: {q.shape[0]} qualities for lambda={params.lam}")
    if pop.ranking is None:
        pop.ranking = rank_qualities(q)

    sel = pop.ranking[: params.mu]
    x_sel = pop.x[:, sel]
    y_sel = pop.y[:, sel]
    m_old = state.m
    sigma_old = state.sigma

    state.m = x_sel @ params.weights
    y_w = (state.m - m_old) / sigma_old

    # sigma path, preconditioned by C^(-1/2) = B diag(1/D) B^T
    c_inv_half_yw = state.b @ ((state.b.T @ y_w) / state.d)
    cs = params.c_sigma
    state.p_sigma = (1.0 - cs) * state.p_sigma + math.sqrt(
        cs * (2.0 - cs) * params.mu_eff
    ) * c_inv_half_yw
    ps_norm = float(np.linalg.norm(state.p_sigma))

    # Heaviside gate: freeze the covariance path while the sigma path is
    # still inflated, so early large steps do not distort C.
    t = state.iter_count + 1
    denom = math.sqrt(1.0 - (1.0 - cs) ** (2 * t))
    h_sigma = ps_norm / denom < (1.4 + 2.0 / (params.n + 1.0)) * params.chi_n

    cc = params.c_c
    gain = math.sqrt(cc * (2.0 - cc) * params.mu_eff) if h_sigma else 0.0
    state.p_c = (1.0 - cc) * state.p_c + gain * y_w

    state.c = adapt_covariance(state.c, state.p_c, y_sel, params)
    state.sigma = sigma_old * math.exp(
        (cs / params.d_sigma) * (ps_norm / params.chi_n - 1.0)
    )

    state.iter_count += 1
    state.eval_count += params.lam
    state.evals_since_eigen += params.lam

    keys = np.where(np.isfinite(q), q, np.inf)
    bi = int(np.argmin(keys))
    iter_best = float(keys[bi])
    if iter_best < state.best_f:
        state.best_f = iter_best
        state.best_x = pop.x[:, bi].copy()
    state.recent_best.append(iter_best)
    state.stagnation_hist.append(iter_best)
    return state


def maybe_eigendecompose(state: CmaState, params: CmaParams, force: bool = False) -> CmaState:
    """Refresh (B, D) from C when the lazy-update period has elapsed.

    The covariance is symmetrized before decomposition. Eigenvalues are
    floored at a tiny positive fraction of the largest one so D stays
    strictly positive. Numeric failure propagates to the driver, which
    records the descent as stopped by covariance degeneracy.
    """
    if not force and state.evals_since_eigen <= params.eigen_period_evals():
        return state
    csym = 0.5 * (state.c + state.c.T)
    pair = linalg.eig_symmetric(csym)
    top = float(pair.values[-1])
    if top <= 0.0:
        raise NumericError("maybe_eigendecompose: covariance collapsed to zero")
    state.b = pair.vectors
    state.d = np.sqrt(np.maximum(pair.values, 1e-20 * top))
    state.evals_since_eigen = 0
    return state


@dataclass(frozen=True)
class DescentLimits:
    """Per-descent termination bounds.

    target is an absolute quality (optimum offset plus the desired gap);
    max_evals bounds this descent's own evaluation count, and an
    iteration never starts unless its whole population fits within the
    bound, so the count never overshoots; deadline_ms is an absolute
    timestamp on the driver's clock, checked by the driver rather than
    by check_stop.
    """

    target: float | None = None
    max_evals: int | None = None
    deadline_ms: float | None = None


def check_stop(state: CmaState, params: CmaParams, limits: DescentLimits) -> StopReason | None:
    """First triggered stopping criterion, in this fixed order:

    TargetHit, MaxEvals, TolFun, TolX, ConditionCov, NoEffectAxis,
    NoEffectCoord, Stagnation. The external deadline is the driver's
    concern (it owns the clock) and precedes the first iteration only.
    """
    if limits.target is not None and state.best_f <= limits.target:
        return StopReason.TARGET_HIT
    if limits.max_evals is not None and state.eval_count + params.lam > limits.max_evals:
        return StopReason.MAX_EVALS
    rb = state.recent_best
    if len(rb) == rb.maxlen and rb.maxlen > 0:
        if max(rb) - min(rb) < _TOLFUN:
            return StopReason.TOL_FUN
    diag_c = np.diag(state.c)
    if state.sigma * math.sqrt(float(np.max(diag_c))) < _TOLX_REL * state.sigma0:
        return StopReason.TOL_X
    dmax = float(np.max(state.d))
    dmin = float(np.min(state.d))
    if (dmax / dmin) ** 2 > _COND_LIMIT:
        return StopReason.CONDITION_COV
    axis = state.iter_count % params.n
    step = 0.1 * state.sigma * state.d[axis] * state.b[:, axis]
    if np.all(state.m + step == state.m):
        return StopReason.NO_EFFECT_AXIS
    coord_step = 0.2 * state.sigma * np.sqrt(np.maximum(diag_c, 0.0))
    if np.any(state.m + coord_step == state.m):
        return StopReason.NO_EFFECT_COORD
    sh = state.stagnation_hist
    if len(sh) == sh.maxlen and sh.maxlen > 0:
        chunk = max(1, sh.maxlen * 3 // 10)
        hist = list(sh)
        if float(np.median(hist[-chunk:])) >= float(np.median(hist[:chunk])):
            return StopReason.STAGNATION
    return None


def as_eval_fn(objective) -> Callable[[np.ndarray], float]:
    """Normalize an objective to a point-scoring callable.

    Accepts anything with an evaluate method or a bare callable, so both
    forms work with every evaluator and neither gets silently absorbed by
    the failure-scores-inf rule.
    """
    fn = getattr(objective, "evaluate", None)
    if fn is not None:
        return fn
    if callable(objective):
        return objective
    raise ConfigError(
        f"objective {objective!r} has no evaluate method and is not callable"
    )


class SequentialEvaluator:
    """Evaluates candidate columns one after another on the calling thread.

    A raised evaluation failure becomes +inf for that point, matching the
    scatter/gather contract, so rankings stay total.
    """

    slots = 1

    def __init__(self, fn: Callable[[np.ndarray], float]):
        self._fn = as_eval_fn(fn)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        lam = x.shape[1]
        out = np.empty(lam)
        for i in range(lam):
            try:
                out[i] = self._fn(x[:, i])
            except Exception:
                out[i] = math.inf
        return out


def run_descent(
    evaluator,
    params: CmaParams,
    state: CmaState,
    rng: np.random.Generator,
    limits: DescentLimits,
    clock,
    descent_id: str,
    k: int,
) -> tuple[RunLog, StopReason]:
    """Drive one descent to its stopping criterion.

    evaluator maps an n-by-lambda batch to lambda qualities and exposes
    `slots`, the number of points it can evaluate concurrently; the clock
    is advanced by ceil(lambda / slots) evaluation rounds per iteration
    (a no-op on real clocks). Records are appended at each iteration end
    with this descent's own cumulative evaluation count.
    """
    log = RunLog()
    log.meta[descent_id] = {
        "k": k,
        "seed": state.seed,
        "start_ms": clock.now_ms(),
    }
    reason: StopReason | None = None
    while True:
        reason = check_stop(state, params, limits)
        if (
            reason is None
            and limits.deadline_ms is not None
            and clock.now_ms() >= limits.deadline_ms
        ):
            reason = StopReason.EXTERNAL_DEADLINE
        if reason is not None:
            break
        try:
            maybe_eigendecompose(state, params)
        except NumericError:
            reason = StopReason.CONDITION_COV
            break
        pop = sample_population(state, params, rng)
        pop.qualities = evaluator(pop.x)
        clock.advance_rounds(math.ceil(params.lam / evaluator.slots))
        update(state, params, pop)
        log.append(
            RunRecord(
                wall_ms=clock.now_ms(),
                evals=state.eval_count,
                best_f=state.best_f,
                descent_id=descent_id,
                k=k,
            )
        )
    log.stops[descent_id] = reason
    log.meta[descent_id]["end_ms"] = clock.now_ms()
    return log, reason
