"""Discrete constellations and the pairwise difference structures they induce.

Every objective and gradient in this package touches symbol vectors only
through the outer products e_ij e_ij^H of their pairwise differences, so the
table precomputes those outer products deduplicated by value (with
multiplicities). The deduplicated sum is an optimization only; tests pin it
to the naive double sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_MAX_VECTORS = 4096


def build_alphabet(order: int, kind: str = "qam") -> np.ndarray:
    """Return `order` constellation points with unit average energy.

    kind="qam": square grid (order a power of 4; order=2 degenerates to the
    antipodal pair). kind="psk": exp(j 2 pi k / order), k = 0..order-1.
    Point ordering is deterministic: PSK by phase index, QAM row-major over
    (real, imag) levels in ascending order.
    """
    kind = kind.lower()
    if order < 2:
        raise ValueError("order must be >= 2")
    if kind == "psk":
        points = np.exp(2j * np.pi * np.arange(order) / order)
        # snap the +-1/+-j cardinal points hit inexactly through pi
        points.real[np.abs(points.real) < 4e-16] = 0.0
        points.imag[np.abs(points.imag) < 4e-16] = 0.0
        return points
    if kind == "qam":
        if order == 2:
            return np.array([1.0 + 0j, -1.0 + 0j])
        side = round(np.sqrt(order))
        if side * side != order or side & (side - 1):
            raise ValueError(
                f"square QAM needs order in {{4, 16, 64, ...}}, got {order}"
            )
        levels = np.arange(-(side - 1), side, 2, dtype=float)
        re, im = np.meshgrid(levels, levels, indexing="ij")
        points = (re + 1j * im).ravel()
        return points / np.sqrt(np.mean(np.abs(points) ** 2))
    raise ValueError(f"unknown constellation kind {kind!r}")


@dataclass(frozen=True)
class ConstellationTable:
    """All symbol vectors of a constellation plus their difference structures.

    vectors[i] enumerates the M^n_streams Cartesian-product symbol vectors in
    lexicographic order; diffs[i, j] = vectors[i] - vectors[j]. gram_values
    holds the distinct e e^H outer products with multiplicities gram_counts;
    gram_values[0] is always the zero matrix (the diagonal pairs, count
    n_symbols).
    """

    alphabet: np.ndarray
    vectors: np.ndarray
    diffs: np.ndarray
    gram_values: np.ndarray
    gram_counts: np.ndarray

    @property
    def n_symbols(self) -> int:
        return self.vectors.shape[0]

    @property
    def n_streams(self) -> int:
        return self.vectors.shape[1]

    @property
    def bits(self) -> float:
        """log2 of the number of symbol vectors."""
        return float(self.n_streams * np.log2(len(self.alphabet)))


def _dedupe_grams(diffs_flat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    grams = diffs_flat[:, :, None] * diffs_flat.conj()[:, None, :]
    n_pairs, n, _ = grams.shape
    key = np.round(
        np.concatenate([grams.real, grams.imag], axis=2).reshape(n_pairs, 2 * n * n),
        decimals=12,
    )
    _, first_idx, counts = np.unique(
        key, axis=0, return_index=True, return_counts=True
    )
    values = grams[first_idx]
    # zero gram (diagonal pairs) first, for easy off-diagonal slicing
    zero_at = np.nonzero(np.abs(values).sum(axis=(1, 2)) == 0)[0]
    if zero_at.size != 1:
        raise AssertionError("expected exactly one zero difference gram")
    order = np.concatenate([zero_at, np.delete(np.arange(len(values)), zero_at)])
    return values[order], counts[order]


def enumerate_vectors(
    alphabet: np.ndarray,
    n_streams: int,
    max_vectors: int = DEFAULT_MAX_VECTORS,
) -> ConstellationTable:
    """Build the full symbol-vector table for `n_streams` parallel streams."""
    if n_streams < 1:
        raise ValueError("n_streams must be >= 1")
    alphabet = np.asarray(alphabet, dtype=complex)
    m = len(alphabet)
    n_symbols = m**n_streams
    if n_symbols > max_vectors:
        raise ValueError(
            f"{m}^{n_streams} = {n_symbols} symbol vectors exceeds cap {max_vectors}"
        )
    # lexicographic: first stream varies slowest
    grids = np.meshgrid(*([alphabet] * n_streams), indexing="ij")
    vectors = np.stack([g.ravel() for g in grids], axis=1)
    diffs = vectors[:, None, :] - vectors[None, :, :]
    gram_values, gram_counts = _dedupe_grams(diffs.reshape(n_symbols * n_symbols, -1))
    return ConstellationTable(
        alphabet=alphabet,
        vectors=vectors,
        diffs=diffs,
        gram_values=gram_values,
        gram_counts=gram_counts,
    )


def build_table(
    order: int,
    kind: str,
    n_streams: int,
    max_vectors: int = DEFAULT_MAX_VECTORS,
) -> ConstellationTable:
    return enumerate_vectors(build_alphabet(order, kind), n_streams, max_vectors)
