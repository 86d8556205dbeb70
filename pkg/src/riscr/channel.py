"""Room geometry, path losses, and Rician channel synthesis.

Coordinate frame (aerial view): the transmit and receive antenna arrays sit
on parallel walls (planes x=0 and x=D), the reflecting surface on the
perpendicular wall y=0. Everything is at the same height, array axes run
along their walls, and the surface is a rectangular grid centered on its
midpoint. All positions are 3-D (x, y, z) in meters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SystemGeometry:
    """Physical layout from which every distance and position derives.

    Lengths are in meters. ``tx_offset`` / ``rx_offset`` are the distances
    from the array midpoints to the reflecting-surface wall plane;
    ``ris_offset`` is the distance from the surface center to the transmit
    wall plane.
    """

    wavelength: float
    wall_separation: float
    tx_offset: float
    rx_offset: float
    ris_offset: float
    tx_spacing: float
    rx_spacing: float
    ris_spacing: float
    n_tx: int
    n_rx: int
    ris_rows: int
    ris_cols: int
    direct_pathloss_exponent: float = 3.0
    rician_k: float = 1.0

    def __post_init__(self) -> None:
        lengths = {
            "wavelength": self.wavelength,
            "wall_separation": self.wall_separation,
            "tx_offset": self.tx_offset,
            "rx_offset": self.rx_offset,
            "ris_offset": self.ris_offset,
            "tx_spacing": self.tx_spacing,
            "rx_spacing": self.rx_spacing,
            "ris_spacing": self.ris_spacing,
        }
        for name, value in lengths.items():
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if not self.n_tx >= self.n_rx >= 1:
            raise ValueError(
                f"need n_tx >= n_rx >= 1, got n_tx={self.n_tx}, n_rx={self.n_rx}"
            )
        if self.ris_rows < 1 or self.ris_cols < 1:
            raise ValueError("reflecting surface needs at least one element")
        if self.rician_k < 0:
            raise ValueError("rician_k must be >= 0")

    @property
    def n_ris(self) -> int:
        return self.ris_rows * self.ris_cols


@dataclass(frozen=True)
class GeometryDistances:
    """Midpoint distances and per-element positions of a laid-out geometry."""

    d0: float
    d1: float
    d2: float
    tx_positions: np.ndarray
    rx_positions: np.ndarray
    ris_positions: np.ndarray


@dataclass(frozen=True)
class ChannelSet:
    """One sampled channel realization plus its path-gain scalars.

    ``beta_dir_inv`` and ``beta_indir_inv`` are the linear power *gains*
    whose square roots scale the direct and reflected terms of the
    composite channel. ``direct_blocked`` removes the direct term from the
    composition entirely; the sampled ``h_direct`` matrix is kept so that
    blocked/unblocked comparisons can share a realization.
    """

    h_direct: np.ndarray
    h_tx_ris: np.ndarray
    h_ris_rx: np.ndarray
    beta_dir_inv: float
    beta_indir_inv: float
    direct_blocked: bool = False

    def __post_init__(self) -> None:
        n_rx, n_tx = self.h_direct.shape
        n_ris = self.h_tx_ris.shape[0]
        if self.h_tx_ris.shape != (n_ris, n_tx):
            raise ValueError("h_tx_ris shape inconsistent with h_direct")
        if self.h_ris_rx.shape != (n_rx, n_ris):
            raise ValueError("h_ris_rx shape inconsistent with h_direct/h_tx_ris")

    @property
    def n_tx(self) -> int:
        return self.h_direct.shape[1]

    @property
    def n_rx(self) -> int:
        return self.h_direct.shape[0]

    @property
    def n_ris(self) -> int:
        return self.h_tx_ris.shape[0]


def _linear_array(center: np.ndarray, axis: np.ndarray, n: int, spacing: float) -> np.ndarray:
    offsets = (np.arange(n) - (n - 1) / 2.0) * spacing
    return center[None, :] + offsets[:, None] * axis[None, :]


def compute_distances(geometry: SystemGeometry) -> GeometryDistances:
    """Lay out all element positions and the three midpoint distances.

    Transmit and receive arrays run along their walls (y axis), directly
    opposite each other; the reflecting surface is a rows x cols grid in
    the y=0 wall plane spanning the x (along-wall) and z (vertical) axes.
    """
    g = geometry
    tx_mid = np.array([0.0, g.tx_offset, 0.0])
    rx_mid = np.array([g.wall_separation, g.rx_offset, 0.0])
    ris_center = np.array([g.ris_offset, 0.0, 0.0])

    along_wall = np.array([0.0, 1.0, 0.0])
    tx_positions = _linear_array(tx_mid, along_wall, g.n_tx, g.tx_spacing)
    rx_positions = _linear_array(rx_mid, along_wall, g.n_rx, g.rx_spacing)

    col_off = (np.arange(g.ris_cols) - (g.ris_cols - 1) / 2.0) * g.ris_spacing
    row_off = (np.arange(g.ris_rows) - (g.ris_rows - 1) / 2.0) * g.ris_spacing
    zz, xx = np.meshgrid(row_off, col_off, indexing="ij")
    ris_positions = ris_center[None, :] + np.stack(
        [xx.ravel(), np.zeros(g.ris_rows * g.ris_cols), zz.ravel()], axis=1
    )

    d0 = float(np.linalg.norm(rx_mid - tx_mid))
    d1 = float(np.linalg.norm(ris_center - tx_mid))
    d2 = float(np.linalg.norm(rx_mid - ris_center))
    return GeometryDistances(
        d0=d0,
        d1=d1,
        d2=d2,
        tx_positions=tx_positions,
        rx_positions=rx_positions,
        ris_positions=ris_positions,
    )


def path_loss_direct(wavelength: float, d0: float, exponent: float) -> float:
    """Distance-dependent power loss of the direct link, (4*pi/lam)^2 * d0^alpha.

    Returns the loss; its inverse is the gain applied to the direct channel.
    """
    if wavelength <= 0 or d0 <= 0:
        raise ValueError("wavelength and d0 must be positive")
    return (4.0 * np.pi / wavelength) ** 2 * d0**exponent


def path_loss_indirect(
    wavelength: float, l_t: float, l_r: float, d1: float, d2: float
) -> float:
    """Far-field free-space power gain of the reflected link.

    lam^4 (l_t/d1 + l_r/d2)^2 / (256 pi^2 d1^2 d2^2); returns the gain
    (inverse loss) directly.
    """
    if min(wavelength, l_t, l_r, d1, d2) <= 0:
        raise ValueError("all arguments must be positive")
    return (
        wavelength**4
        * (l_t / d1 + l_r / d2) ** 2
        / (256.0 * np.pi**2 * d1**2 * d2**2)
    )


def los_matrix(
    positions_a: np.ndarray, positions_b: np.ndarray, wavelength: float
) -> np.ndarray:
    """Unit-modulus line-of-sight matrix, entry (m, n) = exp(-j 2 pi d(a_m, b_n)/lam)."""
    a = np.asarray(positions_a, dtype=float)
    b = np.asarray(positions_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("position lists must be non-empty")
    dist = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    return np.exp(-2j * np.pi * dist / wavelength)


def sample_rician(
    rows: int,
    cols: int,
    k_factor: float,
    los: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw sqrt(K/(K+1))*los + sqrt(1/(K+1))*W with W i.i.d. standard CN(0,1)."""
    if los.shape != (rows, cols):
        raise ValueError(f"los has shape {los.shape}, expected {(rows, cols)}")
    if k_factor < 0:
        raise ValueError("k_factor must be >= 0")
    scatter = (
        rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    ) / np.sqrt(2.0)
    return np.sqrt(k_factor / (k_factor + 1.0)) * los + np.sqrt(
        1.0 / (k_factor + 1.0)
    ) * scatter


def realize_channels(
    geometry: SystemGeometry,
    rng: np.random.Generator,
    direct_blocked: bool = False,
) -> ChannelSet:
    """Sample one Rician realization of all three links around their LOS terms.

    Draw order is fixed (direct, tx->surface, surface->rx) so a given rng
    state always yields the same realization.
    """
    dist = compute_distances(geometry)
    lam = geometry.wavelength
    k = geometry.rician_k

    los_direct = los_matrix(dist.rx_positions, dist.tx_positions, lam)
    los_tx_ris = los_matrix(dist.ris_positions, dist.tx_positions, lam)
    los_ris_rx = los_matrix(dist.rx_positions, dist.ris_positions, lam)

    h_direct = sample_rician(geometry.n_rx, geometry.n_tx, k, los_direct, rng)
    h_tx_ris = sample_rician(geometry.n_ris, geometry.n_tx, k, los_tx_ris, rng)
    h_ris_rx = sample_rician(geometry.n_rx, geometry.n_ris, k, los_ris_rx, rng)

    beta_dir_inv = 1.0 / path_loss_direct(
        lam, dist.d0, geometry.direct_pathloss_exponent
    )
    beta_indir_inv = path_loss_indirect(
        lam, geometry.tx_offset, geometry.rx_offset, dist.d1, dist.d2
    )
    return ChannelSet(
        h_direct=h_direct,
        h_tx_ris=h_tx_ris,
        h_ris_rx=h_ris_rx,
        beta_dir_inv=beta_dir_inv,
        beta_indir_inv=beta_indir_inv,
        direct_blocked=direct_blocked,
    )


def assemble_channel(channels: ChannelSet, theta: np.ndarray) -> np.ndarray:
    """Compose the effective channel sqrt(b_dir) H_d + sqrt(b_ind) H_2 diag(theta) H_1."""
    theta = np.asarray(theta)
    if theta.shape != (channels.n_ris,):
        raise ValueError(
            f"theta has shape {theta.shape}, expected ({channels.n_ris},)"
        )
    indirect = channels.h_ris_rx @ (theta[:, None] * channels.h_tx_ris)
    h = np.sqrt(channels.beta_indir_inv) * indirect
    if not channels.direct_blocked:
        h = h + np.sqrt(channels.beta_dir_inv) * channels.h_direct
    return h
