"""Projected gradient method with analytic conjugate-direction gradients.

Iterates alternate a phase-vector step (project onto the unit-modulus set)
and a precoder step (rescale onto the power sphere), with step sizes from
an Armijo-Goldstein backtracking search: mu = l0 * rho^k for the smallest
k such that f(new) <= f(old) - delta * ||new - old||^2. The sufficient-
decrease test is evaluated on the off-diagonal excess g = f - N_s in the
log domain, which is the same inequality at full precision.

Gradients are taken with respect to the conjugated variables, so for the
real objective f the steepest-descent step is x - mu * grad and finite
differences satisfy df/dRe x = 2 Re(grad), df/dIm x = 2 Im(grad).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet, assemble_channel
from .constellation import ConstellationTable
from .metrics import (
    DesignPoint,
    log_excess_from_phis,
    logf_from_excess,
    pair_phis,
    power_residual,
    rate_from_logf,
    theta_residual,
    weighted_diff_gram,
)

# stop after this many consecutive iterations below rel_tol
REL_TOL_STREAK = 3

# below this log weight-scale the common exponential factor is dropped from
# the step direction (magnitude is absorbed by the line search)
_SCALE_FLOOR = -600.0


@dataclass(frozen=True)
class PgmParams:
    """Line-search and stopping parameters: mu = l0 * rho^k, decrease delta."""

    l0: float = 1e3
    delta: float = 1e-3
    rho: float = 0.5
    max_iters: int = 200
    rel_tol: float = 1e-8
    max_backtracks: int = 60

    def __post_init__(self) -> None:
        if self.l0 <= 0 or self.delta <= 0 or not 0 < self.rho < 1:
            raise ValueError("need l0 > 0, delta > 0, 0 < rho < 1")


@dataclass(frozen=True)
class IterationRecord:
    """State after one outer iteration.

    For the gradient method mu_* are accepted step sizes and backtracks_*
    the backtracking counts k; the convex method reuses the slots for its
    inner-solver step sizes and iteration counts.
    """

    iteration: int
    f: float
    r0: float
    mu_theta: float
    mu_p: float
    backtracks_theta: int
    backtracks_p: int
    theta_residual: float
    power_residual: float
    stalled: bool = False


@dataclass
class OptimizerTrace:
    method: str
    init_point: DesignPoint
    init_f: float
    init_r0: float
    records: list[IterationRecord] = field(default_factory=list)
    points: list[DesignPoint] = field(default_factory=list)
    termination: str = "max_iters"
    n_grad_theta_evals: int = 0
    n_grad_p_evals: int = 0

    @property
    def final(self) -> DesignPoint:
        return self.points[-1] if self.points else self.init_point

    @property
    def f_values(self) -> np.ndarray:
        return np.array([r.f for r in self.records])


def project_theta(theta: np.ndarray) -> np.ndarray:
    """Normalize each entry onto the unit circle; zeros map to 1 (phase 0)."""
    theta = np.asarray(theta, dtype=complex)
    mag = np.abs(theta)
    out = np.where(mag > 0, theta / np.where(mag > 0, mag, 1.0), 1.0 + 0j)
    return out


def project_p(precoder: np.ndarray) -> np.ndarray:
    """Rescale so that Tr(P P^H) equals the number of columns."""
    norm_sq = np.vdot(precoder, precoder).real
    if norm_sq == 0:
        raise ValueError("projection of the zero precoder is undefined")
    n_rx = precoder.shape[1]
    return precoder * np.sqrt(n_rx / norm_sq)


def random_design_point(
    n_ris: int, n_tx: int, n_rx: int, rng: np.random.Generator
) -> DesignPoint:
    """Uniform random phases and a power-normalized complex Gaussian precoder."""
    theta = np.exp(2j * np.pi * rng.random(n_ris))
    precoder = (
        rng.standard_normal((n_tx, n_rx)) + 1j * rng.standard_normal((n_tx, n_rx))
    ) / np.sqrt(2.0)
    return DesignPoint(theta=theta, precoder=project_p(precoder))


def _grad_theta_parts(theta, precoder, channels, table, sigma2):
    """Return (vec, log_scale): the true gradient is vec * exp(log_scale)."""
    h = assemble_channel(channels, theta)
    phis = pair_phis(h, precoder, table)
    a_sum, log_scale = weighted_diff_gram(phis, table, sigma2)
    x = channels.h_ris_rx.conj().T @ (h @ precoder)  # (n_ris, n_rx)
    y = np.sqrt(channels.beta_indir_inv) * (channels.h_tx_ris @ precoder)
    vec_d = np.einsum("la,ab,lb->l", x, a_sum, y.conj())
    return -vec_d / (4.0 * sigma2), log_scale


def _grad_p_parts(theta, precoder, channels, table, sigma2):
    h = assemble_channel(channels, theta)
    phis = pair_phis(h, precoder, table)
    a_sum, log_scale = weighted_diff_gram(phis, table, sigma2)
    grad = h.conj().T @ (h @ precoder) @ a_sum
    return -grad / (4.0 * sigma2), log_scale


def grad_theta(
    theta: np.ndarray,
    precoder: np.ndarray,
    channels: ChannelSet,
    table: ConstellationTable,
    sigma2: float,
) -> np.ndarray:
    """Gradient of the pair-sum objective with respect to conj(theta)."""
    vec, log_scale = _grad_theta_parts(theta, precoder, channels, table, sigma2)
    return vec * np.exp(log_scale)


def grad_p(
    theta: np.ndarray,
    precoder: np.ndarray,
    channels: ChannelSet,
    table: ConstellationTable,
    sigma2: float,
) -> np.ndarray:
    """Gradient of the pair-sum objective with respect to conj(P)."""
    grad, log_scale = _grad_p_parts(theta, precoder, channels, table, sigma2)
    return grad * np.exp(log_scale)


def _step_direction(parts: np.ndarray, log_scale: float) -> np.ndarray:
    if log_scale > _SCALE_FLOOR:
        return parts * np.exp(log_scale)
    return parts


def sufficient_decrease(
    log_g_old: float, log_g_new: float, threshold: float
) -> bool:
    """Test g_new <= g_old - threshold on log-domain excess values."""
    if threshold == 0.0:
        return log_g_new <= log_g_old
    if np.isinf(log_g_old):
        return False
    ratio = np.exp(np.log(threshold) - log_g_old)
    if ratio >= 1.0:
        return False
    return log_g_new <= log_g_old + np.log1p(-ratio)


def _log_excess_at(theta, precoder, channels, table, sigma2) -> float:
    h = assemble_channel(channels, theta)
    phis = pair_phis(h, precoder, table)
    return log_excess_from_phis(phis, table.gram_counts, sigma2)


def line_search_theta(
    theta: np.ndarray,
    precoder: np.ndarray,
    channels: ChannelSet,
    table: ConstellationTable,
    sigma2: float,
    params: PgmParams,
    log_g: float | None = None,
) -> tuple[np.ndarray, float, int, bool, float]:
    """Backtracking phase update; returns (theta_new, mu, k, stalled, log_g_new)."""
    if log_g is None:
        log_g = _log_excess_at(theta, precoder, channels, table, sigma2)
    parts, log_scale = _grad_theta_parts(theta, precoder, channels, table, sigma2)
    grad = _step_direction(parts, log_scale)
    for k in range(params.max_backtracks + 1):
        mu = params.l0 * params.rho**k
        cand = project_theta(theta - mu * grad)
        step = cand - theta
        step_sq = np.vdot(step, step).real
        log_g_new = _log_excess_at(cand, precoder, channels, table, sigma2)
        if sufficient_decrease(log_g, log_g_new, params.delta * step_sq):
            return cand, mu, k, False, log_g_new
    return theta, params.l0 * params.rho**params.max_backtracks, params.max_backtracks, True, log_g


def line_search_p(
    theta: np.ndarray,
    precoder: np.ndarray,
    channels: ChannelSet,
    table: ConstellationTable,
    sigma2: float,
    params: PgmParams,
    log_g: float | None = None,
) -> tuple[np.ndarray, float, int, bool, float]:
    """Backtracking precoder update; returns (p_new, mu, k, stalled, log_g_new)."""
    if log_g is None:
        log_g = _log_excess_at(theta, precoder, channels, table, sigma2)
    parts, log_scale = _grad_p_parts(theta, precoder, channels, table, sigma2)
    grad = _step_direction(parts, log_scale)
    for k in range(params.max_backtracks + 1):
        mu = params.l0 * params.rho**k
        trial = precoder - mu * grad
        if np.vdot(trial, trial).real == 0:
            continue  # zero matrix has no projection; shrink further
        cand = project_p(trial)
        step = cand - precoder
        step_sq = np.vdot(step, step).real
        log_g_new = _log_excess_at(theta, cand, channels, table, sigma2)
        if sufficient_decrease(log_g, log_g_new, params.delta * step_sq):
            return cand, mu, k, False, log_g_new
    return precoder, params.l0 * params.rho**params.max_backtracks, params.max_backtracks, True, log_g


def run_pgm(
    init: DesignPoint,
    channels: ChannelSet,
    table: ConstellationTable,
    sigma2: float,
    params: PgmParams | None = None,
    update_theta: bool = True,
) -> OptimizerTrace:
    """Alternate projected gradient steps in theta and P until convergence.

    The initial point is projected onto the feasible set on entry. Stops on
    REL_TOL_STREAK consecutive relative decreases below rel_tol, on
    max_iters, or when both line searches stall. update_theta=False skips
    every phase update (used by the no-RIS baseline).
    """
    if params is None:
        params = PgmParams()
    theta = project_theta(init.theta)
    precoder = project_p(init.precoder)
    n_s = table.n_symbols

    log_g = _log_excess_at(theta, precoder, channels, table, sigma2)
    logf = logf_from_excess(log_g, n_s)
    trace = OptimizerTrace(
        method="pgm",
        init_point=DesignPoint(theta=theta, precoder=precoder),
        init_f=float(np.exp(logf)),
        init_r0=rate_from_logf(logf, n_s),
    )

    streak = 0
    for it in range(1, params.max_iters + 1):
        log_g_prev = log_g
        theta_prev, precoder_prev = theta, precoder
        if update_theta:
            theta, mu1, k1, stalled_theta, log_g = line_search_theta(
                theta, precoder, channels, table, sigma2, params, log_g
            )
            trace.n_grad_theta_evals += 1
        else:
            mu1, k1, stalled_theta = 0.0, 0, True
        precoder, mu2, k2, stalled_p, log_g = line_search_p(
            theta, precoder, channels, table, sigma2, params, log_g
        )
        trace.n_grad_p_evals += 1
        zero_move = np.array_equal(theta, theta_prev) and np.array_equal(
            precoder, precoder_prev
        )

        logf = logf_from_excess(log_g, n_s)
        f = float(np.exp(logf))
        stalled = stalled_p and (stalled_theta or not update_theta)
        trace.records.append(
            IterationRecord(
                iteration=it,
                f=f,
                r0=rate_from_logf(logf, n_s),
                mu_theta=mu1,
                mu_p=mu2,
                backtracks_theta=k1,
                backtracks_p=k2,
                theta_residual=theta_residual(theta),
                power_residual=power_residual(precoder),
                stalled=stalled,
            )
        )
        trace.points.append(DesignPoint(theta=theta.copy(), precoder=precoder.copy()))

        if stalled:
            trace.termination = "stalled"
            break
        if zero_move:
            # accepted steps of zero length: projected-stationary point
            trace.termination = "converged"
            break
        # relative decrease of f, computed through the excess difference
        if np.isinf(log_g_prev):
            rel_dec = 0.0
        else:
            rel_dec = np.exp(log_g_prev) * (-np.expm1(log_g - log_g_prev)) / f
        if rel_dec < params.rel_tol:
            streak += 1
            if streak >= REL_TOL_STREAK:
                trace.termination = "converged"
                break
        else:
            streak = 0
    return trace
