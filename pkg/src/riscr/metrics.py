"""Pairwise-distance objective, cutoff rate, mutual information, and baselines.

The central quantity is f = sum_{i,j} exp(-Phi_ij / 4 sigma^2) with
Phi_ij = ||H P (x_i - x_j)||^2. At realistic noise levels individual
exponentials underflow, so everything is evaluated in the log domain:
log f and the log of the off-diagonal excess g = f - N_s are exact even
when single terms are ~exp(-1e5). f itself always lies in [N_s, N_s^2]
and is therefore representable at true scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .channel import ChannelSet, assemble_channel
from .constellation import ConstellationTable

LOG2E = np.log2(np.e)


@dataclass(frozen=True)
class DesignPoint:
    """The optimization variables: phase-shift vector and precoding matrix.

    mode="strict" means the unit-modulus / power-equality constraints,
    mode="relaxed" the disk / power-ball relaxation.
    """

    theta: np.ndarray
    precoder: np.ndarray
    mode: str = "strict"


def theta_residual(theta: np.ndarray) -> float:
    """max_l |1 - |theta_l||, zero on the unit-modulus set."""
    return float(np.max(np.abs(1.0 - np.abs(theta))))


def power_residual(precoder: np.ndarray) -> float:
    """|Tr(P P^H) - n_rx| where n_rx is the number of precoder columns."""
    n_rx = precoder.shape[1]
    return float(abs(np.vdot(precoder, precoder).real - n_rx))


def is_feasible(point: DesignPoint, tol: float = 1e-9) -> bool:
    if point.mode == "relaxed":
        n_rx = point.precoder.shape[1]
        power_ok = np.vdot(point.precoder, point.precoder).real <= n_rx + tol
        return bool(np.all(np.abs(point.theta) <= 1.0 + tol) and power_ok)
    return theta_residual(point.theta) <= tol and power_residual(point.precoder) <= tol


def phi(h: np.ndarray, precoder: np.ndarray, diff: np.ndarray) -> float:
    """Squared pair distance ||H P e||^2 for a single difference vector."""
    v = h @ (precoder @ diff)
    return float(np.vdot(v, v).real)


def pair_phis(h: np.ndarray, precoder: np.ndarray, table: ConstellationTable) -> np.ndarray:
    """||H P e||^2 for every deduplicated difference gram.

    Uses Phi = tr(G S) with S = (HP)^H (HP), so the cost scales with the
    number of distinct grams instead of N_s^2.
    """
    v = h @ precoder
    s = v.conj().T @ v
    return np.einsum("uab,ba->u", table.gram_values, s).real


def logf_from_phis(phis: np.ndarray, counts: np.ndarray, sigma2: float) -> float:
    """log of the full pair sum f, diagonal terms included."""
    return float(logsumexp(-phis / (4.0 * sigma2), b=counts))


def log_excess_from_phis(phis: np.ndarray, counts: np.ndarray, sigma2: float) -> float:
    """log of the off-diagonal part g = f - N_s (−inf when there are no pairs).

    Accepts negative phi values so the affine surrogates of the convex
    method can reuse it.
    """
    if len(phis) <= 1:
        return -np.inf
    return float(logsumexp(-phis[1:] / (4.0 * sigma2), b=counts[1:]))


def logf_from_excess(log_excess: float, n_symbols: int) -> float:
    return float(np.logaddexp(np.log(n_symbols), log_excess))


def rate_from_logf(logf: float, n_symbols: int) -> float:
    """R0 = 2 log2 N_s - log2 f in bits per channel use."""
    return (2.0 * np.log(n_symbols) - logf) / np.log(2.0)


def scaled_pair_weights(
    phis: np.ndarray, counts: np.ndarray, sigma2: float
) -> tuple[np.ndarray, float]:
    """Off-diagonal pair weights c_u exp(-Phi_u/4sigma^2), commonly rescaled.

    Returns (w, log_scale) with the true weights equal to w * exp(log_scale);
    the rescaling keeps gradient accumulations representable when every
    exponential underflows.
    """
    if len(phis) <= 1:
        return np.zeros(0), 0.0
    a = -phis[1:] / (4.0 * sigma2)
    a_max = float(np.max(a))
    return counts[1:] * np.exp(a - a_max), a_max


def weighted_diff_gram(
    phis: np.ndarray, table: ConstellationTable, sigma2: float
) -> tuple[np.ndarray, float]:
    """Scaled weighted gram sum A = sum_u c_u w_u G_u over off-diagonal grams.

    Returns (A_scaled, log_scale) with the true sum A_scaled * exp(log_scale).
    """
    w, log_scale = scaled_pair_weights(phis, table.gram_counts, sigma2)
    if w.size == 0:
        return np.zeros_like(table.gram_values[0]), 0.0
    a_sum = np.einsum("u,uab->ab", w, table.gram_values[1:])
    return a_sum, log_scale


def _evaluate(theta, precoder, channels, table, sigma2):
    h = assemble_channel(channels, theta)
    phis = pair_phis(h, precoder, table)
    return logf_from_phis(phis, table.gram_counts, sigma2)


def objective_f(
    theta: np.ndarray,
    precoder: np.ndarray,
    channels: ChannelSet,
    table: ConstellationTable,
    sigma2: float,
) -> float:
    """The pair-sum objective f at true scale (always in [N_s, N_s^2])."""
    return float(np.exp(_evaluate(theta, precoder, channels, table, sigma2)))


def objective_logf(
    theta: np.ndarray,
    precoder: np.ndarray,
    channels: ChannelSet,
    table: ConstellationTable,
    sigma2: float,
) -> float:
    """Natural log of the pair-sum objective."""
    return _evaluate(theta, precoder, channels, table, sigma2)


def cutoff_rate(
    theta: np.ndarray,
    precoder: np.ndarray,
    channels: ChannelSet,
    table: ConstellationTable,
    sigma2: float,
) -> float:
    """Cutoff rate R0 = -log2(f / N_s^2) in bpcu, log-sum-exp evaluated."""
    logf = _evaluate(theta, precoder, channels, table, sigma2)
    return rate_from_logf(logf, table.n_symbols)


def cutoff_rate_half_noise(
    theta: np.ndarray,
    precoder: np.ndarray,
    channels: ChannelSet,
    table: ConstellationTable,
    sigma2: float,
) -> float:
    """Cutoff rate evaluated at half the noise power."""
    return cutoff_rate(theta, precoder, channels, table, sigma2 / 2.0)


def mi_lower_bound(r0_half: float, n_rx: int) -> float:
    """Lower bound on the mutual information, n_rx (1 - log2 e) + R0_half.

    Can be negative at low rates; returned unclamped.
    """
    return n_rx * (1.0 - LOG2E) + r0_half


def mutual_information_mc(
    theta: np.ndarray,
    precoder: np.ndarray,
    channels: ChannelSet,
    table: ConstellationTable,
    sigma2: float,
    n_noise: int = 1000,
    rng: np.random.Generator | None = None,
) -> tuple[float, float]:
    """Monte Carlo mutual information of the discrete-input channel, in bpcu.

    Estimates log2 N_s - (1/N_s) sum_i E_n[log2 sum_j exp(psi_ij)] with
    psi_ij = (-||HP(x_i - x_j) + n||^2 + ||n||^2)/sigma^2, using n_noise
    independent noise draws per symbol index (inner sums by log-sum-exp).
    Returns (estimate, standard error); deterministic for a seeded rng.
    """
    if n_noise < 1:
        raise ValueError("n_noise must be >= 1")
    if rng is None:
        rng = np.random.default_rng()
    h = assemble_channel(channels, theta)
    y = table.vectors @ (h @ precoder).T  # (n_s, n_rx), row i = H P x_i
    n_s, n_rx = y.shape
    d = y[:, None, :] - y[None, :, :]  # (n_s, n_s, n_rx)
    phis = np.sum(np.abs(d) ** 2, axis=-1)

    noise = (
        rng.standard_normal((n_s, n_noise, n_rx))
        + 1j * rng.standard_normal((n_s, n_noise, n_rx))
    ) * np.sqrt(sigma2 / 2.0)

    # psi_ijk = -(phis_ij + 2 Re <d_ij, n_ik>) / sigma^2; chunk over draws
    samples = np.empty((n_s, n_noise))
    d_conj = d.conj()
    chunk = max(1, (1 << 22) // (n_s * n_s))
    for start in range(0, n_noise, chunk):
        nk = noise[:, start : start + chunk, :]
        cross = np.matmul(d_conj, nk.transpose(0, 2, 1)).real  # (n_s, n_s, chunk)
        psi = -(phis[:, :, None] + 2.0 * cross) / sigma2
        samples[:, start : start + chunk] = logsumexp(psi, axis=1) / np.log(2.0)

    mi = float(table.bits - samples.mean())
    if n_noise >= 2:
        var_i = samples.var(axis=1, ddof=1)
        stderr = float(np.sqrt(var_i.sum()) / (n_s * np.sqrt(n_noise)))
    else:
        stderr = np.inf
    return mi, stderr


def gaussian_rate(
    theta: np.ndarray,
    precoder: np.ndarray,
    channels: ChannelSet,
    sigma2: float,
) -> float:
    """Gaussian-signaling rate log2 det(I + H P P^H H^H / sigma^2) in bpcu."""
    h = assemble_channel(channels, theta)
    hp = h @ precoder
    n_rx = h.shape[0]
    gram = np.eye(n_rx) + hp @ hp.conj().T / sigma2
    _, logdet = np.linalg.slogdet(gram)
    return float(logdet / np.log(2.0))


@dataclass(frozen=True)
class RateReport:
    """All rate metrics of one design point.

    mi_lower_bound may be negative at low rates (reported unclamped);
    f_log is the natural log of the pair-sum objective.
    """

    r0: float
    mi: float
    mi_stderr: float
    mi_lower_bound: float
    gaussian_rate: float
    f_log: float


def rate_report(
    theta: np.ndarray,
    precoder: np.ndarray,
    channels: ChannelSet,
    table: ConstellationTable,
    sigma2: float,
    n_noise: int = 0,
    rng: np.random.Generator | None = None,
) -> RateReport:
    """Evaluate every RateReport field at one point.

    n_noise = 0 skips the Monte Carlo mutual information (NaN fields).
    """
    logf = _evaluate(theta, precoder, channels, table, sigma2)
    r0 = rate_from_logf(logf, table.n_symbols)
    r0_half = cutoff_rate_half_noise(theta, precoder, channels, table, sigma2)
    if n_noise > 0:
        mi, stderr = mutual_information_mc(
            theta, precoder, channels, table, sigma2, n_noise, rng
        )
    else:
        mi, stderr = np.nan, np.nan
    return RateReport(
        r0=r0,
        mi=mi,
        mi_stderr=stderr,
        mi_lower_bound=mi_lower_bound(r0_half, table.n_streams),
        gaussian_rate=gaussian_rate(theta, precoder, channels, sigma2),
        f_log=logf,
    )
