"""Log pseudo-likelihood of a time-heterogeneous STERGM and its derivatives.

``theta`` is a (tau, p) array; row ``r`` holds the formation parameters
followed by the dissolution parameters for the transition into time r + 2.
"""
from __future__ import annotations

import numpy as np

from .stats import ChangeStatBlocks, ModelDesign


def softplus(x: np.ndarray) -> np.ndarray:
    """log(1 + exp(x)) without overflow."""
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def sigmoid(x: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def check_theta(theta, blocks: ChangeStatBlocks) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (blocks.tau, blocks.p):
        raise ValueError(f"theta has shape {theta.shape}, expected {(blocks.tau, blocks.p)}")
    if not np.isfinite(theta).all():
        raise ValueError("theta has non-finite entries")
    return theta


def _eta(design: ModelDesign, theta_part: np.ndarray) -> np.ndarray:
    return np.einsum("tmp,tp->tm", design.X, theta_part)


def _model_loglik(design: ModelDesign, theta_part: np.ndarray) -> np.ndarray:
    eta = _eta(design, theta_part)
    return (design.w * (design.y * eta - softplus(eta))).sum(axis=1)


def transition_loglik(theta, blocks: ChangeStatBlocks) -> tuple[np.ndarray, np.ndarray]:
    """Per-transition formation and dissolution contributions, each length tau."""
    theta = check_theta(theta, blocks)
    p1 = blocks.p1
    return (
        _model_loglik(blocks.formation, theta[:, :p1]),
        _model_loglik(blocks.dissolution, theta[:, p1:]),
    )


def pseudo_loglik(theta, blocks: ChangeStatBlocks) -> float:
    form, diss = transition_loglik(theta, blocks)
    return float(np.concatenate([form, diss]).sum())


def fitted_probabilities(theta, blocks: ChangeStatBlocks) -> tuple[np.ndarray, np.ndarray]:
    """Dyad probabilities mu (on the compressed rows) for both models."""
    theta = check_theta(theta, blocks)
    p1 = blocks.p1
    return (
        sigmoid(_eta(blocks.formation, theta[:, :p1])),
        sigmoid(_eta(blocks.dissolution, theta[:, p1:])),
    )


def gradient(theta, blocks: ChangeStatBlocks) -> np.ndarray:
    theta = check_theta(theta, blocks)
    mu_f, mu_d = fitted_probabilities(theta, blocks)
    f, d = blocks.formation, blocks.dissolution
    return np.concatenate(
        [
            np.einsum("tm,tmp->tp", f.w * (f.y - mu_f), f.X),
            np.einsum("tm,tmp->tp", d.w * (d.y - mu_d), d.X),
        ],
        axis=1,
    )


def hessian_blocks(theta, blocks: ChangeStatBlocks) -> np.ndarray:
    """(tau, p, p) array of the negative log pseudo-likelihood curvature.

    Block ``r`` is Delta^T W Delta for that transition, with zero
    formation/dissolution cross terms.
    """
    theta = check_theta(theta, blocks)
    mu_f, mu_d = fitted_probabilities(theta, blocks)
    f, d = blocks.formation, blocks.dissolution
    p1 = blocks.p1
    out = np.zeros((blocks.tau, blocks.p, blocks.p))
    out[:, :p1, :p1] = np.einsum("tm,tmp,tmq->tpq", f.w * mu_f * (1 - mu_f), f.X, f.X)
    out[:, p1:, p1:] = np.einsum("tm,tmp,tmq->tpq", d.w * mu_d * (1 - mu_d), d.X, d.X)
    return out


def gradient_and_hessian(theta, blocks: ChangeStatBlocks) -> tuple[float, np.ndarray, np.ndarray]:
    """Log pseudo-likelihood, gradient and Hessian blocks from one pass."""
    theta = check_theta(theta, blocks)
    p1 = blocks.p1
    loglik = 0.0
    grad = np.empty_like(theta)
    hess = np.zeros((blocks.tau, blocks.p, blocks.p))
    for design, sl in ((blocks.formation, slice(0, p1)), (blocks.dissolution, slice(p1, None))):
        eta = _eta(design, theta[:, sl])
        mu = sigmoid(eta)
        loglik += float((design.w * (design.y * eta - softplus(eta))).sum())
        grad[:, sl] = np.einsum("tm,tmp->tp", design.w * (design.y - mu), design.X)
        hess[:, sl, sl] = np.einsum("tm,tmp,tmq->tpq", design.w * mu * (1 - mu), design.X, design.X)
    return loglik, grad, hess
