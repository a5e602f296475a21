"""Change point localization and BIC model selection over a lambda grid."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from statistics import NormalDist

import numpy as np

from .network import NetworkSeries
from .plik import pseudo_loglik, sigmoid, softplus
from .solver import SolverConfig, SolverError, admm_fit
from .stats import ChangeStatBlocks, StatisticSpec, build_change_stat_blocks

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA_GRID = tuple(10.0**b for b in range(-2, 8))


@dataclass(frozen=True)
class DetectionConfig:
    quantile_level: float = 0.9
    delta_spc: int = 5
    delta_end: int = 5
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    # "refit": the likelihood in the BIC is maximised separately on each
    # detected segment; "fitted": it is evaluated at the penalised estimate.
    bic_likelihood: str = "refit"

    def __post_init__(self):
        if self.bic_likelihood not in ("refit", "fitted"):
            raise ValueError("bic_likelihood must be 'refit' or 'fitted'")
        if not 0 < self.quantile_level < 1:
            raise ValueError("quantile_level must lie in (0, 1)")
        if self.delta_spc < 0 or self.delta_end < 0:
            raise ValueError("delta_spc and delta_end must be non-negative")
        grid = tuple(float(x) for x in self.lambda_grid)
        if not grid:
            raise ValueError("lambda_grid must not be empty")
        if any(x <= 0 for x in grid):
            raise ValueError("lambda values must be positive")
        object.__setattr__(self, "lambda_grid", tuple(sorted(grid)))


def param_diffs(theta_hat: np.ndarray) -> np.ndarray:
    """Euclidean norm of consecutive row differences, length tau - 1."""
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    if theta_hat.ndim != 2 or theta_hat.shape[0] < 2:
        raise ValueError("need a (tau, p) trajectory with tau >= 2")
    return np.linalg.norm(np.diff(theta_hat, axis=0), axis=1)


def standardize(delta_theta: np.ndarray) -> tuple[np.ndarray, bool]:
    """Median-centre and scale by the sample standard deviation.

    Returns ``(delta_zeta, degenerate)``; a zero standard deviation gives
    an all-zero vector and ``degenerate=True``.
    """
    x = np.asarray(delta_theta, dtype=np.float64)
    if x.size < 2:
        raise ValueError("need at least two parameter differences")
    sd = float(np.std(x, ddof=1))
    if sd == 0.0 or not np.isfinite(sd):
        return np.zeros_like(x), True
    return (x - np.median(x)) / sd, False


def normal_quantile(level: float) -> float:
    return NormalDist().inv_cdf(level)


def threshold(delta_zeta: np.ndarray, quantile_level: float = 0.9) -> float:
    z = np.asarray(delta_zeta, dtype=np.float64)
    return float(np.mean(z) + normal_quantile(quantile_level) * np.std(z, ddof=1))


def localize(
    delta_zeta: np.ndarray, cfg: DetectionConfig, T: int, eps_thr: float | None = None
) -> tuple[list[int], list[int]]:
    """Raw and post-processed change points (1-based time points).

    Difference ``i`` (0-based) compares the transitions into times i + 2
    and i + 3, so an exceedance there is reported at time i + 3.
    """
    z = np.asarray(delta_zeta, dtype=np.float64)
    if eps_thr is None:
        eps_thr = threshold(z, cfg.quantile_level)
    raw = [int(i) + 3 for i in np.flatnonzero(z > eps_thr)]
    score = {int(i) + 3: float(z[i]) for i in range(z.size)}

    kept: list[int] = []
    for t in raw:
        if kept and t - kept[-1] < cfg.delta_spc:
            if score[t] > score[kept[-1]]:
                kept[-1] = t
            continue
        kept.append(t)
    final = [t for t in kept if cfg.delta_end < t <= T - cfg.delta_end]
    return raw, final


def network_size(n: int, directed: bool) -> int:
    return n * (n - 1) if directed else n * (n - 1) // 2


def bic(loglik: float, K: int, p: int, n: int, directed: bool, T: int) -> float:
    if K < 0:
        raise ValueError("K must be non-negative")
    return -2.0 * loglik + math.log(T * network_size(n, directed)) * p * (K + 1)


def bic_for_fit(theta_hat, blocks: ChangeStatBlocks, K: int) -> float:
    s = blocks.series
    return bic(pseudo_loglik(theta_hat, blocks), K, blocks.p, s.n, s.directed, s.T)


def _pooled_fit(design, rows: np.ndarray, max_iter: int = 100) -> tuple[np.ndarray, float]:
    # Unpenalised logistic fit shared by the transitions in ``rows``.
    X = design.X[rows].reshape(-1, design.X.shape[2])
    y = design.y[rows].ravel()
    w = design.w[rows].ravel()
    keep = w > 0
    X, y, w = X[keep], y[keep], w[keep]

    def ll(th):
        eta = X @ th
        return float((w * (y * eta - softplus(eta))).sum())

    th = np.zeros(X.shape[1])
    cur = ll(th)
    for _ in range(max_iter):
        mu = sigmoid(X @ th)
        g = X.T @ (w * (y - mu))
        H = (X * (w * mu * (1 - mu))[:, None]).T @ X
        H[np.diag_indices_from(H)] += 1e-10 * (1.0 + np.trace(H))
        step = np.linalg.solve(H, g)
        t = 1.0
        while t > 1e-8:
            new = ll(th + t * step)
            if new >= cur:
                break
            t *= 0.5
        else:
            break
        th = th + t * step
        done = new - cur <= 1e-12 * (1.0 + abs(cur))
        cur = new
        if done:
            break
    return th, cur


def segment_loglik(blocks: ChangeStatBlocks, change_points, T: int | None = None) -> float:
    """Maximised log pseudo-likelihood with one parameter vector per segment.

    Segments are delimited by ``change_points`` (1-based times); transition
    row r belongs to time r + 2.
    """
    T = blocks.series.T if T is None else T
    times = np.arange(2, T + 1)
    bounds = [2] + sorted(int(c) for c in change_points) + [T + 1]
    total = 0.0
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        rows = np.flatnonzero((times >= lo) & (times < hi))
        if rows.size == 0:
            continue
        total += _pooled_fit(blocks.formation, rows)[1] + _pooled_fit(blocks.dissolution, rows)[1]
    return total


@dataclass
class LambdaFit:
    lam: float
    theta_hat: np.ndarray
    delta_theta: np.ndarray
    delta_zeta: np.ndarray
    threshold: float
    raw_points: list[int]
    change_points: list[int]
    loglik: float
    bic: float
    converged: bool
    n_iter: int
    degenerate: bool = False
    failed: bool = False
    message: str = ""


@dataclass
class DetectionResult:
    T: int
    fits: list[LambdaFit]
    selected: int
    spec: StatisticSpec | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def best(self) -> LambdaFit:
        return self.fits[self.selected]

    @property
    def change_points(self) -> list[int]:
        return self.best.change_points

    @property
    def K(self) -> int:
        return len(self.change_points)


def fit_lambda(
    blocks: ChangeStatBlocks, solver_cfg: SolverConfig, det_cfg: DetectionConfig
) -> LambdaFit:
    T = blocks.series.T
    try:
        state = admm_fit(blocks, solver_cfg)
    except SolverError as exc:
        logger.warning("lambda=%g failed: %s", solver_cfg.lam, exc)
        nan = np.full(blocks.tau - 1, np.nan)
        return LambdaFit(
            solver_cfg.lam, np.full((blocks.tau, blocks.p), np.nan), nan, nan, math.nan,
            [], [], -math.inf, math.inf, False, 0, failed=True, message=str(exc),
        )
    # the fused estimate is exactly piecewise constant; the Newton iterate
    # only agrees with it up to the ADMM tolerance
    theta = state.z
    dtheta = param_diffs(theta)
    dzeta, degenerate = standardize(dtheta)
    if degenerate:
        eps, raw, final = math.inf, [], []
    else:
        eps = threshold(dzeta, det_cfg.quantile_level)
        raw, final = localize(dzeta, det_cfg, T, eps)
    loglik = pseudo_loglik(theta, blocks)
    s = blocks.series
    # an iterate worse than the all-zero start means the ADMM run blew up
    floor = pseudo_loglik(np.zeros_like(theta), blocks)
    if not math.isfinite(loglik) or loglik < floor:
        return LambdaFit(
            solver_cfg.lam, theta, dtheta, dzeta, eps, raw, final, loglik, math.inf,
            False, state.n_iter, degenerate, failed=True, message="diverged",
        )
    if det_cfg.bic_likelihood == "refit":
        score_ll = segment_loglik(blocks, final)
    else:
        score_ll = loglik
    return LambdaFit(
        lam=solver_cfg.lam,
        theta_hat=theta,
        delta_theta=dtheta,
        delta_zeta=dzeta,
        threshold=eps,
        raw_points=raw,
        change_points=final,
        loglik=loglik,
        bic=bic(score_ll, len(final), blocks.p, s.n, s.directed, s.T),
        converged=state.converged,
        n_iter=state.n_iter,
        degenerate=degenerate,
        message="; ".join(sorted(set(state.events))),
    )


def select_by_bic(fits: list[LambdaFit]) -> int:
    """Index of the minimal BIC; ties go to the smaller lambda."""
    best = None
    for k, fit in enumerate(fits):
        if fit.failed or math.isnan(fit.bic):
            continue
        if best is None or fit.bic < fits[best].bic or (
            fit.bic == fits[best].bic and fit.lam < fits[best].lam
        ):
            best = k
    return 0 if best is None else best


def detect_from_blocks(
    blocks: ChangeStatBlocks, solver_cfg: SolverConfig, det_cfg: DetectionConfig
) -> DetectionResult:
    fits = [
        fit_lambda(blocks, replace(solver_cfg, lam=lam), det_cfg) for lam in det_cfg.lambda_grid
    ]
    result = DetectionResult(blocks.series.T, fits, select_by_bic(fits), blocks.spec)
    if all(not f.converged for f in fits):
        result.notes.append("no lambda reached the ADMM stopping tolerance")
    return result


def detect_change_points(
    series: NetworkSeries,
    spec: StatisticSpec,
    solver_cfg: SolverConfig | None = None,
    det_cfg: DetectionConfig | None = None,
) -> DetectionResult:
    if series.T < 3:
        raise ValueError("change point detection needs at least 3 snapshots")
    blocks = build_change_stat_blocks(series, spec)
    return detect_from_blocks(blocks, solver_cfg or SolverConfig(), det_cfg or DetectionConfig())
