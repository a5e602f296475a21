"""ADMM for the group-fused-lasso penalized STERGM pseudo-likelihood.

Each outer iteration runs plain Newton steps on theta, block
coordinate descent on the group lasso reparametrisation (gamma, beta) of
the slack variable z, and a scaled dual update, followed by residual-based
rescaling of the augmentation penalty alpha.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numba
import numpy as np

from .network import NetworkSeries
from .plik import gradient_and_hessian, pseudo_loglik
from .stats import ChangeStatBlocks, StatisticSpec, build_change_stat_blocks

logger = logging.getLogger(__name__)


class SolverError(ArithmeticError):
    """Unrecoverable numerical failure inside the solver."""


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 1.0
    alpha0: float = 10.0
    max_admm_iters: int = 200
    newton_iters: int = 20
    group_lasso_iters: int = 20
    admm_tol: float = 1e-7
    newton_tol: float = 1e-3
    kkt_tol: float = 1e-6

    def __post_init__(self):
        for name in ("alpha0", "admm_tol", "newton_tol", "kkt_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        for name in ("max_admm_iters", "newton_iters", "group_lasso_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")


@dataclass(frozen=True)
class PositionWeights:
    """Gap weights d_i = sqrt(tau / (i (tau - i))), i = 1..tau-1.

    The design X (tau x (tau-1)) has X[k, j] = d[j] for k > j and 0
    otherwise (0-based), so ``X @ beta`` is a shifted cumulative sum.
    """

    d: np.ndarray

    @property
    def tau(self) -> int:
        return self.d.size + 1

    def design_matrix(self) -> np.ndarray:
        tau = self.tau
        k = np.arange(tau)[:, None]
        j = np.arange(tau - 1)[None, :]
        return np.where(k > j, self.d[None, :], 0.0)

    def apply(self, beta: np.ndarray) -> np.ndarray:
        out = np.zeros((self.tau, beta.shape[1]))
        out[1:] = np.cumsum(self.d[:, None] * beta, axis=0)
        return out

    def col_sq_norms(self) -> np.ndarray:
        """X_i^T X_i = d_i^2 (tau - i) in closed form."""
        i = np.arange(1, self.tau)
        return self.d**2 * (self.tau - i)


def position_weights(tau: int) -> PositionWeights:
    if tau < 2:
        raise ValueError(f"need tau >= 2, got {tau}")
    i = np.arange(1, tau, dtype=np.float64)
    return PositionWeights(np.sqrt(tau / (i * (tau - i))))


@dataclass
class AdmmState:
    theta: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    u: np.ndarray
    alpha: float
    weights: PositionWeights
    history: list[dict] = field(default_factory=list)
    converged: bool = False
    events: list[str] = field(default_factory=list)

    @classmethod
    def initial(cls, tau: int, p: int, alpha0: float) -> "AdmmState":
        return cls(
            theta=np.zeros((tau, p)),
            gamma=np.zeros(p),
            beta=np.zeros((tau - 1, p)),
            u=np.zeros((tau, p)),
            alpha=float(alpha0),
            weights=position_weights(tau),
        )

    @property
    def z(self) -> np.ndarray:
        return self.gamma[None, :] + self.weights.apply(self.beta)

    @property
    def n_iter(self) -> int:
        return len(self.history)


# --- theta update -----------------------------------------------------------


def _solve_spd(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched solve of symmetric positive definite systems A x = b."""
    try:
        np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        p = A.shape[-1]
        trace = np.trace(A, axis1=-2, axis2=-1)
        jitter = 1e-8 * (1.0 + trace / p)
        A = A + jitter[:, None, None] * np.eye(p)
        try:
            np.linalg.cholesky(A)
        except np.linalg.LinAlgError as exc:
            raise SolverError("regularized Hessian block is not positive definite") from exc
    return np.linalg.solve(A, b[..., None])[..., 0]


def newton_step(
    theta: np.ndarray, z: np.ndarray, u: np.ndarray, alpha: float, blocks: ChangeStatBlocks
) -> np.ndarray:
    """One Newton direction for -l(theta) + alpha/2 ||theta - z + u||^2.

    Returns the step to subtract from ``theta``; the tau block systems are
    solved independently.
    """
    _, grad, hess = gradient_and_hessian(theta, blocks)
    rhs = -grad + alpha * (theta - z + u)
    A = hess + alpha * np.eye(blocks.p)[None, :, :]
    return _solve_spd(A, rhs)


def augmented_objective(theta, z, u, alpha, blocks) -> float:
    return -pseudo_loglik(theta, blocks) + 0.5 * alpha * float(((theta - z + u) ** 2).sum())


def theta_update(
    state: AdmmState, blocks: ChangeStatBlocks, cfg: SolverConfig
) -> np.ndarray:
    z, u, alpha = state.z, state.u, state.alpha
    theta = state.theta.copy()
    for _ in range(cfg.newton_iters):
        step = newton_step(theta, z, u, alpha, blocks)
        new = theta - step
        if not np.isfinite(new).all() or not np.isfinite(
            augmented_objective(new, z, u, alpha, blocks)
        ):
            step = 0.5 * step
            new = theta - step
            state.events.append("newton step halved after non-finite objective")
            logger.warning("non-finite Newton iterate; halving step")
            if not np.isfinite(new).all():
                raise SolverError("Newton iterate is non-finite")
        theta = new
        if np.linalg.norm(step) < cfg.newton_tol:
            break
    return theta


# --- (gamma, beta) update ----------------------------------------------------


@numba.njit(cache=True)
def _gl_kkt(resid, beta, d, alpha, lam):
    # Largest KKT violation over the blocks; ``resid`` = target - 1 gamma - X beta.
    tau, p = resid.shape
    worst = 0.0
    suffix = np.zeros(p)
    for i in range(tau - 2, -1, -1):
        for c in range(p):
            suffix[c] += resid[i + 1, c]
        nb = 0.0
        for c in range(p):
            nb += beta[i, c] ** 2
        nb = np.sqrt(nb)
        r = 0.0
        if nb > 0.0:
            for c in range(p):
                r += (lam * beta[i, c] / nb - alpha * d[i] * suffix[c]) ** 2
            r = np.sqrt(r)
        else:
            for c in range(p):
                r += (alpha * d[i] * suffix[c]) ** 2
            r = max(np.sqrt(r) - lam, 0.0)
        if r > worst:
            worst = r
    # stationarity in gamma: the residual must have zero column sums
    for c in range(p):
        g = 0.0
        for k in range(tau):
            g += resid[k, c]
        if alpha * abs(g) > worst:
            worst = alpha * abs(g)
    return worst


@numba.njit(cache=True)
def _gl_bcd(target, resid, beta, gamma, d, alpha, lam, max_sweeps, kkt_tol):
    # One sweep updates beta_1..beta_{tau-1} in order with gamma held fixed,
    # then refreshes gamma to its exact minimiser. X_i^T X_i = d_i^2 (tau - i)
    # and X_i^T v = d_i * sum_{k > i} v_k.
    tau, p = resid.shape
    s = np.empty(p)
    sweeps = 0
    kkt = _gl_kkt(resid, beta, d, alpha, lam)
    while sweeps < max_sweeps and kkt > kkt_tol:
        for i in range(tau - 1):
            xtx = d[i] * d[i] * (tau - i - 1)
            ns = 0.0
            for c in range(p):
                acc = 0.0
                for k in range(i + 1, tau):
                    acc += resid[k, c]
                s[c] = alpha * (d[i] * acc + xtx * beta[i, c])
                ns += s[c] ** 2
            ns = np.sqrt(ns)
            shrink = 0.0
            if ns > lam:
                shrink = (1.0 - lam / ns) / (alpha * xtx)
            for c in range(p):
                delta = shrink * s[c] - beta[i, c]
                if delta != 0.0:
                    beta[i, c] += delta
                    for k in range(i + 1, tau):
                        resid[k, c] -= d[i] * delta
        for c in range(p):
            shift = 0.0
            for k in range(tau):
                shift += resid[k, c]
            shift /= tau
            gamma[c] += shift
            for k in range(tau):
                resid[k, c] -= shift
        sweeps += 1
        kkt = _gl_kkt(resid, beta, d, alpha, lam)
    return sweeps, kkt


@dataclass(frozen=True)
class GroupLassoResult:
    gamma: np.ndarray
    beta: np.ndarray
    kkt: float
    sweeps: int


def group_lasso_objective(target, gamma, beta, weights: PositionWeights, alpha, lam) -> float:
    fit = gamma[None, :] + weights.apply(beta)
    return 0.5 * alpha * float(((target - fit) ** 2).sum()) + lam * float(
        np.linalg.norm(beta, axis=1).sum()
    )


def solve_group_lasso(
    target: np.ndarray,
    beta0: np.ndarray,
    weights: PositionWeights,
    alpha: float,
    lam: float,
    max_sweeps: int,
    kkt_tol: float,
    gamma0: np.ndarray | None = None,
) -> GroupLassoResult:
    """Minimise lam sum_i ||beta_i|| + alpha/2 ||target - 1 gamma - X beta||_F^2.

    Block coordinate descent from ``(gamma0, beta0)``; stops after
    ``max_sweeps`` sweeps or once the KKT residual is at most ``kkt_tol``.
    """
    target = np.ascontiguousarray(target, dtype=np.float64)
    if not (np.isfinite(target).all() and np.isfinite(beta0).all()):
        raise SolverError("non-finite input to the group lasso update")
    beta = np.array(beta0, dtype=np.float64, copy=True)
    if gamma0 is None:
        gamma = (target - weights.apply(beta)).mean(axis=0)
    else:
        gamma = np.array(gamma0, dtype=np.float64, copy=True)
    resid = target - gamma[None, :] - weights.apply(beta)
    sweeps, kkt = _gl_bcd(
        target, resid, beta, gamma, weights.d, float(alpha), float(lam),
        int(max_sweeps), float(kkt_tol),
    )
    return GroupLassoResult(gamma, beta, float(kkt), int(sweeps))


def group_lasso_update(state: AdmmState, cfg: SolverConfig) -> GroupLassoResult:
    return solve_group_lasso(
        state.theta + state.u,
        state.beta,
        state.weights,
        state.alpha,
        cfg.lam,
        cfg.group_lasso_iters,
        cfg.kkt_tol,
        gamma0=state.gamma,
    )


# --- dual and penalty updates -----------------------------------------------


def dual_update(theta: np.ndarray, z: np.ndarray, u: np.ndarray) -> np.ndarray:
    return u + theta - z


def residuals(theta, z, z_prev) -> tuple[float, float]:
    primal = float(np.sqrt(np.mean((theta - z) ** 2)))
    dual = float(np.sqrt(np.mean((z - z_prev) ** 2)))
    return primal, dual


def alpha_schedule(alpha: float, u: np.ndarray, r_primal: float, r_dual: float):
    if r_primal > 10 * r_dual:
        return 2 * alpha, u / 2
    if r_dual > 10 * r_primal:
        return alpha / 2, 2 * u
    return alpha, u


# --- driver ------------------------------------------------------------------


def admm_fit(blocks: ChangeStatBlocks, cfg: SolverConfig) -> AdmmState:
    """Run the ADMM on precomputed change statistic blocks."""
    if blocks.tau < 2:
        raise ValueError("need at least 3 snapshots (two transitions) to fit")
    state = AdmmState.initial(blocks.tau, blocks.p, cfg.alpha0)
    l_prev = pseudo_loglik(state.theta, blocks)
    z = state.z
    for a in range(cfg.max_admm_iters):
        state.theta = theta_update(state, blocks, cfg)
        gl = group_lasso_update(state, cfg)
        state.gamma, state.beta = gl.gamma, gl.beta
        z_new = state.z
        state.u = dual_update(state.theta, z_new, state.u)
        r_primal, r_dual = residuals(state.theta, z_new, z)
        z = z_new
        state.alpha, state.u = alpha_schedule(state.alpha, state.u, r_primal, r_dual)
        l_new = pseudo_loglik(state.theta, blocks)
        if not np.isfinite(l_new):
            raise SolverError(f"log pseudo-likelihood became non-finite at iteration {a + 1}")
        rel = abs(l_new - l_prev) / abs(l_prev) if l_prev != 0 else 0.0
        state.history.append(
            {
                "iter": a + 1,
                "loglik": l_new,
                "r_primal": r_primal,
                "r_dual": r_dual,
                "alpha": state.alpha,
                "gl_kkt": gl.kkt,
                "gl_sweeps": gl.sweeps,
                "rel_change": rel,
            }
        )
        if rel <= cfg.admm_tol:
            state.converged = True
            break
        l_prev = l_new
    if not state.converged:
        logger.info("ADMM hit the iteration cap (%d) for lambda=%g", cfg.max_admm_iters, cfg.lam)
    return state


def run_admm(
    series: NetworkSeries, spec: StatisticSpec, cfg: SolverConfig
) -> tuple[np.ndarray, AdmmState]:
    blocks = build_change_stat_blocks(series, spec)
    state = admm_fit(blocks, cfg)
    return state.theta, state
