"""Successive convex approximation on the relaxed feasible sets.

The equality constraints are relaxed to Tr(P P^H) <= n_rx and |theta_l| <= 1
(the optima still sit on the boundary, which boundary_check verifies). Each
outer iteration linearizes every pair distance Phi around the current point;
since Phi is convex in each block, the affine form is a global minorant, so
the resulting surrogate sum of exponentials majorizes the true objective and
touches it at the anchor. Minimizing the surrogate (a smooth convex problem
over a ball / polydisk with closed-form projections) can therefore never
increase the true objective.

The surrogate subproblems are solved by a projected gradient descent with a
backtracking line search and a gradient-mapping stopping rule; no external
conic solver is involved.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

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
    scaled_pair_weights,
    theta_residual,
)
from .pgm import (
    IterationRecord,
    OptimizerTrace,
    _SCALE_FLOOR,
    sufficient_decrease,
)

_INNER_DELTA = 1e-4  # sufficient-decrease constant of the inner line search
_INNER_MAX_BACKTRACKS = 60


@dataclass(frozen=True)
class ScaParams:
    outer_max_iters: int = 100
    outer_rel_tol: float = 1e-8
    inner_max_iters: int = 500
    inner_tol: float = 1e-8
    boundary_tol: float = 1e-2

    def __post_init__(self) -> None:
        if min(
            self.outer_max_iters,
            self.outer_rel_tol,
            self.inner_max_iters,
            self.inner_tol,
            self.boundary_tol,
        ) <= 0:
            raise ValueError("all ScaParams fields must be positive")


@dataclass(frozen=True)
class PrecoderLinearization:
    """Affine minorants of every pair distance around a precoder anchor.

    phi_tilde_u(P) = phis[u] + 2 Re tr(G_u^H wp^H (P - anchor)) where
    wp = H^H H @ anchor; entry 0 (the zero gram) stays identically zero.
    """

    anchor: np.ndarray
    phis: np.ndarray
    wp: np.ndarray
    grams: np.ndarray

    def values(self, precoder: np.ndarray) -> np.ndarray:
        t = self.wp.conj().T @ (precoder - self.anchor)
        cross = np.einsum("uab,ab->u", self.grams.conj(), t).real
        return self.phis + 2.0 * cross

    def gradient(self, weights: np.ndarray, sigma2: float) -> np.ndarray:
        a_sum = np.einsum("u,uab->ab", weights, self.grams[1:])
        return -(self.wp @ a_sum) / (4.0 * sigma2)


@dataclass(frozen=True)
class PhaseLinearization:
    """Affine minorants of every pair distance around a phase-vector anchor."""

    anchor: np.ndarray
    phis: np.ndarray
    coeffs: np.ndarray  # (n_grams, n_ris) conjugate-gradient rows

    def values(self, theta: np.ndarray) -> np.ndarray:
        cross = (self.coeffs.conj() @ (theta - self.anchor)).real
        return self.phis + 2.0 * cross

    def gradient(self, weights: np.ndarray, sigma2: float) -> np.ndarray:
        return -(weights @ self.coeffs[1:]) / (4.0 * sigma2)


def linearize_phi_p(
    theta: np.ndarray,
    precoder: np.ndarray,
    channels: ChannelSet,
    table: ConstellationTable,
) -> PrecoderLinearization:
    h = assemble_channel(channels, theta)
    phis = pair_phis(h, precoder, table)
    wp = h.conj().T @ (h @ precoder)
    return PrecoderLinearization(
        anchor=precoder.copy(), phis=phis, wp=wp, grams=table.gram_values
    )


def linearize_phi_theta(
    theta: np.ndarray,
    precoder: np.ndarray,
    channels: ChannelSet,
    table: ConstellationTable,
) -> PhaseLinearization:
    h = assemble_channel(channels, theta)
    phis = pair_phis(h, precoder, table)
    x = channels.h_ris_rx.conj().T @ (h @ precoder)  # (n_ris, n_rx)
    y = np.sqrt(channels.beta_indir_inv) * (channels.h_tx_ris @ precoder)
    coeffs = np.einsum("la,uab,lb->ul", x, table.gram_values, y.conj())
    return PhaseLinearization(anchor=theta.copy(), phis=phis, coeffs=coeffs)


def project_ball(precoder: np.ndarray) -> np.ndarray:
    """Project onto the Frobenius ball Tr(P P^H) <= n_rx."""
    n_rx = precoder.shape[1]
    norm_sq = np.vdot(precoder, precoder).real
    if norm_sq <= n_rx:
        return precoder
    return precoder * np.sqrt(n_rx / norm_sq)


def project_polydisk(theta: np.ndarray) -> np.ndarray:
    """Clamp each entry's magnitude to 1, keeping its phase."""
    mag = np.abs(theta)
    return np.where(mag > 1.0, theta / np.where(mag > 1.0, mag, 1.0), theta)


@dataclass(frozen=True)
class InnerInfo:
    iterations: int
    residual: float
    converged: bool
    step: float


def _solve_inner(
    lin,
    project: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    table: ConstellationTable,
    sigma2: float,
    params: ScaParams,
    step0: float = 1.0,
) -> tuple[np.ndarray, InnerInfo]:
    """Projected gradient descent on the surrogate sum of exponentials."""
    counts = table.gram_counts
    x = project(x0)
    vals = lin.values(x)
    log_s = log_excess_from_phis(vals, counts, sigma2)
    t = step0
    residual = np.inf
    converged = False
    iterations = 0
    for iterations in range(1, params.inner_max_iters + 1):
        weights, log_scale = scaled_pair_weights(vals, counts, sigma2)
        grad = lin.gradient(weights, sigma2)
        if log_scale > _SCALE_FLOOR:
            grad = grad * np.exp(log_scale)
        t_try = t * 4.0
        accepted = False
        for _ in range(_INNER_MAX_BACKTRACKS):
            cand = project(x - t_try * grad)
            step = cand - x
            step_sq = np.vdot(step, step).real
            vals_new = lin.values(cand)
            log_s_new = log_excess_from_phis(vals_new, counts, sigma2)
            if sufficient_decrease(log_s, log_s_new, _INNER_DELTA * step_sq):
                residual = np.sqrt(step_sq) / t_try
                x, vals, log_s, t = cand, vals_new, log_s_new, t_try
                accepted = True
                break
            t_try *= 0.5
        if not accepted:
            break
        if residual <= params.inner_tol:
            converged = True
            break
    return x, InnerInfo(
        iterations=iterations, residual=float(residual), converged=converged, step=t
    )


def solve_subproblem_p(
    linearization: PrecoderLinearization,
    table: ConstellationTable,
    sigma2: float,
    params: ScaParams,
    step0: float = 1.0,
) -> tuple[np.ndarray, InnerInfo]:
    """Minimize the precoder surrogate over the power ball (warm-started)."""
    return _solve_inner(
        linearization, project_ball, linearization.anchor, table, sigma2, params, step0
    )


def solve_subproblem_theta(
    linearization: PhaseLinearization,
    table: ConstellationTable,
    sigma2: float,
    params: ScaParams,
    step0: float = 1.0,
) -> tuple[np.ndarray, InnerInfo]:
    """Minimize the phase surrogate over the unit polydisk (warm-started)."""
    return _solve_inner(
        linearization,
        project_polydisk,
        linearization.anchor,
        table,
        sigma2,
        params,
        step0,
    )


@dataclass(frozen=True)
class BoundaryReport:
    theta_residual: float
    power_residual: float
    passed: bool


def boundary_check(point: DesignPoint, tol: float = 1e-2) -> BoundaryReport:
    """How far a (converged) point sits from the boundary of the relaxed sets."""
    t_res = theta_residual(point.theta)
    p_res = power_residual(point.precoder)
    return BoundaryReport(
        theta_residual=t_res, power_residual=p_res, passed=t_res <= tol and p_res <= tol
    )


def _log_excess(theta, precoder, channels, table, sigma2) -> float:
    h = assemble_channel(channels, theta)
    phis = pair_phis(h, precoder, table)
    return log_excess_from_phis(phis, table.gram_counts, sigma2)


def run_sca(
    init: DesignPoint,
    channels: ChannelSet,
    table: ConstellationTable,
    sigma2: float,
    params: ScaParams | None = None,
    update_theta: bool = True,
) -> OptimizerTrace:
    """Alternate precoder and phase surrogate minimizations.

    The initial point is projected into the relaxed feasible set. Stops when
    the relative objective decrease drops below outer_rel_tol or on
    outer_max_iters. A half-step whose true objective would come out larger
    than the current one (possible only through last-ulp rounding, the
    surrogate majorant excludes it mathematically) is discarded, so the
    recorded objective sequence is non-increasing by construction.
    """
    if params is None:
        params = ScaParams()
    theta = project_polydisk(np.asarray(init.theta, dtype=complex))
    precoder = project_ball(init.precoder)
    n_s = table.n_symbols

    log_g = _log_excess(theta, precoder, channels, table, sigma2)
    logf = logf_from_excess(log_g, n_s)
    trace = OptimizerTrace(
        method="sca",
        init_point=DesignPoint(theta=theta, precoder=precoder, mode="relaxed"),
        init_f=float(np.exp(logf)),
        init_r0=rate_from_logf(logf, n_s),
    )

    step_p = 1.0
    step_t = 1.0
    for it in range(1, params.outer_max_iters + 1):
        log_g_prev = log_g

        lin_p = linearize_phi_p(theta, precoder, channels, table)
        p_cand, info_p = solve_subproblem_p(lin_p, table, sigma2, params, step_p)
        step_p = info_p.step
        log_g_mid = _log_excess(theta, p_cand, channels, table, sigma2)
        if log_g_mid <= log_g:
            precoder, log_g = p_cand, log_g_mid

        if update_theta:
            lin_t = linearize_phi_theta(theta, precoder, channels, table)
            t_cand, info_t = solve_subproblem_theta(lin_t, table, sigma2, params, step_t)
            step_t = info_t.step
            log_g_new = _log_excess(t_cand, precoder, channels, table, sigma2)
            if log_g_new <= log_g:
                theta, log_g = t_cand, log_g_new
        else:
            info_t = InnerInfo(iterations=0, residual=0.0, converged=True, step=0.0)

        logf = logf_from_excess(log_g, n_s)
        f = float(np.exp(logf))
        trace.records.append(
            IterationRecord(
                iteration=it,
                f=f,
                r0=rate_from_logf(logf, n_s),
                mu_theta=info_t.step,
                mu_p=info_p.step,
                backtracks_theta=info_t.iterations,
                backtracks_p=info_p.iterations,
                theta_residual=theta_residual(theta),
                power_residual=power_residual(precoder),
            )
        )
        trace.points.append(
            DesignPoint(theta=theta.copy(), precoder=precoder.copy(), mode="relaxed")
        )

        if np.isinf(log_g_prev):
            rel_dec = 0.0
        else:
            rel_dec = np.exp(log_g_prev) * (-np.expm1(log_g - log_g_prev)) / f
        if rel_dec < params.outer_rel_tol:
            trace.termination = "converged"
            break
    return trace
