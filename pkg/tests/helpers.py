"""Shared test utilities: synthetic instances and independent oracles.

The oracles here deliberately avoid the library's vectorized paths: the
objective oracle is a plain double loop over symbol vectors with scalar
exponentials, and the gradient oracle is central finite differencing over
the real and imaginary parts of each variable.
"""

import math

import numpy as np

from riscr.channel import ChannelSet, assemble_channel
from riscr.constellation import build_table
from riscr.pgm import random_design_point


def cn(rng, *shape):
    """i.i.d. standard circularly-symmetric complex Gaussian entries."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def make_channels(rng, n_tx, n_rx, n_ris, blocked=False, beta_dir=1.0, beta_indir=1.0):
    """Unit-scale random channel set (no geometry), for well-conditioned math."""
    return ChannelSet(
        h_direct=cn(rng, n_rx, n_tx),
        h_tx_ris=cn(rng, n_ris, n_tx),
        h_ris_rx=cn(rng, n_rx, n_ris),
        beta_dir_inv=beta_dir,
        beta_indir_inv=beta_indir,
        direct_blocked=blocked,
    )


def make_instance(rng, n_tx=3, n_rx=2, n_ris=4, order=2, kind="qam", sigma2=None):
    channels = make_channels(rng, n_tx, n_rx, n_ris)
    table = build_table(order, kind, n_rx)
    if sigma2 is None:
        sigma2 = float(rng.uniform(0.5, 2.0))
    point = random_design_point(n_ris, n_tx, n_rx, rng)
    return channels, table, point, sigma2


def matched_sigma2(channels, table, point, rng=None):
    """Noise power matched to the instance's own pair-distance scale.

    Puts the median pair exponent Phi/4sigma^2 at O(1), keeping the
    objective away from both the flat saturated regime (where gradients
    vanish below double precision) and the all-ones regime.
    """
    from riscr.metrics import pair_phis

    h = assemble_channel(channels, point.theta)
    phis = pair_phis(h, point.precoder, table)
    med = float(np.median(phis[1:]))
    spread = 1.0 if rng is None else float(rng.uniform(0.5, 2.0))
    return med / 4.0 * spread


def make_conditioned_instance(rng, **kwargs):
    """Instance whose noise power keeps pair exponentials at O(1)."""
    channels, table, point, _ = make_instance(rng, **kwargs)
    return channels, table, point, matched_sigma2(channels, table, point, rng)


def naive_objective(theta, precoder, channels, table, sigma2):
    """Brute-force double loop over all ordered symbol-vector pairs."""
    h = assemble_channel(channels, theta)
    total = 0.0
    for i in range(table.n_symbols):
        for j in range(table.n_symbols):
            e = table.vectors[i] - table.vectors[j]
            v = h @ (precoder @ e)
            phi = float(np.sum(np.abs(v) ** 2))
            total += math.exp(-phi / (4.0 * sigma2))
    return total


def fd_gradient(fun, x, step=1e-6):
    """Central-difference conjugate gradient of a real function of complex x.

    Returns g with df/dRe x = 2 Re g and df/dIm x = 2 Im g, i.e. directly
    comparable to the analytic gradients.
    """
    x = np.asarray(x, dtype=complex)
    out = np.empty_like(x)
    it = np.nditer(np.zeros(x.shape), flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        parts = []
        for delta in (step, 1j * step):
            xp = x.copy()
            xm = x.copy()
            xp[idx] += delta
            xm[idx] -= delta
            parts.append((fun(xp) - fun(xm)) / (2.0 * step))
        out[idx] = (parts[0] + 1j * parts[1]) / 2.0
    return out
