"""Core array operations: complex soft thresholding, the unitary 2-D DFT,
circular patch extraction/aggregation, and PSNR.

All functions are pure and operate on plain numpy arrays. Images are 2-D
arrays (real or complex); patch matrices hold one vectorized patch per
column, row-major within the patch. Patch operations use circular
(wrap-around) boundaries so that the full stride-1 extract/aggregate pair
satisfies sum_n P_n^T P_n = R * I exactly.
"""

import numpy as np

__all__ = [
    "soft_threshold",
    "fft2_unitary",
    "ifft2_unitary",
    "extract_patches",
    "aggregate_patches",
    "all_positions",
    "psnr",
]


def _check_image(x, name="image"):
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise ValueError(f"{name} must be a 2-D array with nonzero dimensions, got shape {x.shape}")
    return x


def soft_threshold(v, a):
    """Complex soft thresholding: shrink magnitudes by ``a``, preserve phase.

    Returns ``v - a*sgn(v)`` where ``|v| > a`` and 0 elsewhere, with
    ``sgn(v) = v/|v|`` and ``sgn(0) = 0``. Works elementwise on arrays;
    ``a`` broadcasts against ``v`` (e.g. one threshold per row).
    """
    v = np.asarray(v)
    a = np.asarray(a)
    if np.any(a < 0):
        raise ValueError("threshold must be nonnegative")
    absv = np.abs(v)
    safe = np.where(absv > 0, absv, 1.0)
    sgn = np.where(absv > 0, v / safe, 0)
    out = np.where(absv > a, v - a * sgn, np.zeros_like(v))
    return out[()] if out.ndim == 0 else out


def fft2_unitary(x):
    """Orthonormal 2-D DFT (norm preserved: ||Fx|| = ||x||)."""
    x = _check_image(x)
    return np.fft.fft2(x, norm="ortho")


def ifft2_unitary(x):
    """Inverse orthonormal 2-D DFT; exact inverse of :func:`fft2_unitary`."""
    x = _check_image(x)
    return np.fft.ifft2(x, norm="ortho")


def all_positions(height, width):
    """All stride-1 top-left patch positions of an image, row-major."""
    rr, cc = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    return np.column_stack([rr.ravel(), cc.ravel()])


def _window_indices(positions, patch_shape, height, width):
    pos = np.asarray(positions, dtype=np.intp)
    if pos.ndim != 2 or pos.shape[1] != 2:
        raise ValueError("positions must be an (n, 2) array of top-left corners")
    ph, pw = patch_shape
    rows = (pos[:, 0, None] + np.arange(ph)) % height
    cols = (pos[:, 1, None] + np.arange(pw)) % width
    return rows, cols


def extract_patches(img, patch_shape, positions=None):
    """Extract circular patches as a matrix with one column per position.

    Parameters
    ----------
    img : 2-D array
    patch_shape : (patch_h, patch_w)
    positions : (n, 2) int array of top-left corners, or None for all
        stride-1 positions (row-major order). Positions wrap circularly.

    Returns
    -------
    (patch_h * patch_w, n) array; each column is one patch vectorized
    row-major.
    """
    img = _check_image(img)
    h, w = img.shape
    ph, pw = patch_shape
    if not (1 <= ph <= h and 1 <= pw <= w):
        raise ValueError(f"patch shape {patch_shape} does not fit image shape {img.shape}")
    if positions is None:
        positions = all_positions(h, w)
    rows, cols = _window_indices(positions, patch_shape, h, w)
    patches = img[rows[:, :, None], cols[:, None, :]]
    return patches.reshape(len(rows), ph * pw).T


def aggregate_patches(pm, patch_shape, positions, shape):
    """Adjoint of :func:`extract_patches`: scatter-add columns back.

    Satisfies <extract(x), M> == <x, aggregate(M)> exactly for all x, M.
    """
    pm = np.asarray(pm)
    h, w = shape
    ph, pw = patch_shape
    pos = np.asarray(positions, dtype=np.intp)
    if pm.ndim != 2 or pm.shape[0] != ph * pw or pm.shape[1] != len(pos):
        raise ValueError(
            f"patch matrix shape {pm.shape} inconsistent with patch shape "
            f"{patch_shape} and {len(pos)} positions"
        )
    rows, cols = _window_indices(pos, patch_shape, h, w)
    out = np.zeros(shape, dtype=np.result_type(pm.dtype, np.float64))
    vals = pm.T.reshape(len(pos), ph, pw)
    np.add.at(out, (rows[:, :, None], cols[:, None, :]), vals)
    return out


def psnr(recon, reference, peak=None):
    """Peak signal-to-noise ratio in dB: 20*log10(peak / RMSE).

    RMSE is taken over complex magnitudes of the difference. ``peak``
    defaults to the maximum magnitude of the reference. Identical inputs
    return +inf.
    """
    recon = _check_image(recon, "recon")
    reference = _check_image(reference, "reference")
    if recon.shape != reference.shape:
        raise ValueError(f"shape mismatch: {recon.shape} vs {reference.shape}")
    if peak is None:
        peak = float(np.max(np.abs(reference)))
    if peak <= 0:
        raise ValueError("peak must be positive")
    mse = np.mean(np.abs(recon - reference) ** 2)
    if mse == 0:
        return float("inf")
    return float(20.0 * np.log10(peak / np.sqrt(mse)))
