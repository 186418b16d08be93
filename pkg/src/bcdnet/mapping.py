"""The encoding-decoding mapping layer: one filter matrix with matching
thresholds, applied patch-wise with identical filters on both sides.

A layer holds K filters of R = patch_h * patch_w taps each (columns of a
complex R x K matrix, unit-ball norms) and K nonnegative thresholds. The
encoder correlates each filter with the image (equivalently: inner products
with every circular stride-1 patch), the coefficients are soft thresholded,
and the decoder synthesizes patches with the same filters. Overlapping
reconstructions are averaged: under circular stride-1 extraction every pixel
is covered by exactly R patches, so the aggregate is divided by R to keep
the mapping scale-preserving (an orthonormal filter set with zero thresholds
reproduces the input exactly).
"""

import numpy as np

from .ops import aggregate_patches, all_positions, extract_patches, soft_threshold

__all__ = ["LayerMapping", "apply_mapping", "init_dct_filters"]

# filter norms may exceed 1 by at most this much before being rejected;
# anything inside the band is renormalized on construction
NORM_SLACK = 1e-9


class LayerMapping:
    """One trained layer: filters ``D`` (R x K complex), thresholds (K,)."""

    def __init__(self, filters, thresholds, patch_shape):
        filters = np.array(filters, dtype=complex)
        thresholds = np.array(thresholds, dtype=float)
        ph, pw = int(patch_shape[0]), int(patch_shape[1])
        if filters.ndim != 2:
            raise ValueError("filters must be a 2-D (R, K) matrix")
        if filters.shape[0] != ph * pw:
            raise ValueError(
                f"filter length {filters.shape[0]} != patch size {ph}x{pw}"
            )
        if thresholds.shape != (filters.shape[1],):
            raise ValueError("need exactly one threshold per filter")
        if np.any(thresholds < 0):
            raise ValueError("thresholds must be nonnegative")
        norms = np.linalg.norm(filters, axis=0)
        if np.any(norms > 1.0 + NORM_SLACK):
            raise ValueError("filter norms must not exceed 1")
        over = norms > 1.0
        if np.any(over):
            filters[:, over] /= norms[over]
        self.filters = filters
        self.thresholds = thresholds
        self.patch_shape = (ph, pw)

    @property
    def n_filters(self):
        return self.filters.shape[1]

    @property
    def patch_len(self):
        return self.filters.shape[0]


def apply_mapping(layer, x):
    """Apply one layer to an image: encode, threshold, decode, average.

    Computes (1/R) * sum_n P_n^T D T_alpha(D^H P_n x) over all circular
    stride-1 patch positions n. Output shape equals input shape.
    """
    x = np.asarray(x)
    h, w = x.shape
    ph, pw = layer.patch_shape
    if ph > h or pw > w:
        raise ValueError(f"patch shape {layer.patch_shape} exceeds image shape {x.shape}")
    positions = all_positions(h, w)
    patches = extract_patches(x, layer.patch_shape, positions)
    coeffs = layer.filters.conj().T @ patches
    coded = soft_threshold(coeffs, layer.thresholds[:, None])
    recon = layer.filters @ coded
    z = aggregate_patches(recon, layer.patch_shape, positions, (h, w))
    return z / layer.patch_len


def init_dct_filters(patch_h, patch_w, n_filters):
    """First ``n_filters`` atoms of the 2-D orthonormal DCT basis.

    Atoms are vectorized row-major and ordered row-major over the 2-D
    frequency index; every column has unit norm. Requires
    ``n_filters <= patch_h * patch_w``.
    """
    r = patch_h * patch_w
    if not (1 <= n_filters <= r):
        raise ValueError(f"filter count must be in [1, {r}], got {n_filters}")

    def dct_matrix(n):
        p = np.arange(n)[:, None]
        m = np.arange(n)[None, :]
        c = np.cos(np.pi * (2 * m + 1) * p / (2 * n))
        c *= np.sqrt(2.0 / n)
        c[0, :] = np.sqrt(1.0 / n)
        return c

    basis = np.kron(dct_matrix(patch_h).T, dct_matrix(patch_w).T)
    return basis[:, :n_filters].astype(complex)
