"""Scikit-learn style estimators wrapping the functional training and
recovery APIs, so the method drops into pipelines, grid search, and
cross-validation tooling.

``BCDNetDenoiser.fit(X, y)`` takes noisy images ``X`` and clean targets
``y``; ``BCDNetReconstructor.fit(X, y, mask=...)`` takes masked k-space
grids and clean targets. ``predict`` recovers one image per input.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .ops import psnr
from .recovery import (
    KIND_DENOISE,
    KIND_MRI,
    DenoisingProblem,
    MriProblem,
    recover,
)
from .training import TrainingConfig, train_network

__all__ = ["BCDNetDenoiser", "BCDNetReconstructor", "as_image_stack"]


def as_image_stack(data, name="X", dtype=complex):
    """Validate a stack of images: a (n, h, w) array or a sequence of
    equally shaped 2-D arrays with finite entries."""
    if isinstance(data, np.ndarray) and data.ndim == 3:
        images = [data[i] for i in range(data.shape[0])]
    else:
        images = [np.asarray(im) for im in data]
    if not images:
        raise ValueError(f"{name} must contain at least one image")
    shape = images[0].shape
    out = []
    for i, im in enumerate(images):
        im = np.asarray(im, dtype=dtype)
        if im.ndim != 2:
            raise ValueError(f"{name}[{i}] must be 2-D, got shape {im.shape}")
        if im.shape != shape:
            raise ValueError(f"{name}[{i}] shape {im.shape} != {shape}")
        if not np.all(np.isfinite(im.view(float) if np.iscomplexobj(im) else im)):
            raise ValueError(f"{name}[{i}] contains non-finite values")
        out.append(im)
    return out


class _BCDNetBase(BaseEstimator):
    def _config(self):
        lam = self.lam
        if lam is None:
            if getattr(self, "noise_sigma", None) is None:
                raise ValueError("set lam, or noise_sigma to derive lam = 10 / noise_sigma")
            lam = 10.0 / self.noise_sigma
        patch = self.patch_size
        patch_shape = (patch, patch) if np.isscalar(patch) else tuple(patch)
        return TrainingConfig(
            lam=lam,
            n_filters=self.n_filters,
            patch_shape=patch_shape,
            n_patches=self.n_patches,
            n_layers=self.n_layers,
            admm_iters=self.admm_iters,
            v_subgrad_iters=self.v_iters,
            alpha_subgrad_iters=self.alpha_iters,
            rel_diff_tol=self.rel_tol,
            max_block_sweeps=self.max_sweeps,
            rho0=self.rho0,
            seed=self.random_state,
        )

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError(
                f"this {type(self).__name__} instance is not fitted yet"
            )

    def score(self, X, y):
        """Mean PSNR (dB) of the recovered images against references."""
        refs = as_image_stack(y, "y")
        recs = self.predict(X)
        return float(np.mean([psnr(r, ref) for r, ref in zip(recs, refs)]))


class BCDNetDenoiser(_BCDNetBase):
    """Learned layered denoiser with a fit/predict interface.

    Parameters mirror the training configuration; ``lam=None`` derives the
    data-fit weight as ``10 / noise_sigma`` with the noise level given in
    data units.
    """

    def __init__(self, n_layers=10, n_filters=64, patch_size=8, n_patches=20000,
                 lam=None, noise_sigma=None, admm_iters=4, v_iters=4,
                 alpha_iters=4, rel_tol=2e-3, max_sweeps=120, rho0=1.0,
                 random_state=0):
        self.n_layers = n_layers
        self.n_filters = n_filters
        self.patch_size = patch_size
        self.n_patches = n_patches
        self.lam = lam
        self.noise_sigma = noise_sigma
        self.admm_iters = admm_iters
        self.v_iters = v_iters
        self.alpha_iters = alpha_iters
        self.rel_tol = rel_tol
        self.max_sweeps = max_sweeps
        self.rho0 = rho0
        self.random_state = random_state

    def fit(self, X, y):
        """Fit on noisy images ``X`` and clean targets ``y``."""
        noisy = as_image_stack(X, "X")
        clean = as_image_stack(y, "y")
        if len(noisy) != len(clean):
            raise ValueError("X and y must contain equally many images")
        problems = [DenoisingProblem(im) for im in noisy]
        self.model_, self.history_ = train_network(
            clean, problems, KIND_DENOISE, self._config()
        )
        return self

    def predict(self, X):
        """Denoise each image in ``X``."""
        self._check_fitted()
        noisy = as_image_stack(X, "X")
        return np.stack(
            [recover(self.model_, DenoisingProblem(im))[0] for im in noisy]
        )


class BCDNetReconstructor(_BCDNetBase):
    """Learned layered reconstructor for masked k-space measurements."""

    def __init__(self, n_layers=10, n_filters=64, patch_size=8, n_patches=20000,
                 lam=1e6, admm_iters=4, v_iters=4, alpha_iters=4, rel_tol=2e-3,
                 max_sweeps=180, rho0=1.0, random_state=0):
        self.n_layers = n_layers
        self.n_filters = n_filters
        self.patch_size = patch_size
        self.n_patches = n_patches
        self.lam = lam
        self.admm_iters = admm_iters
        self.v_iters = v_iters
        self.alpha_iters = alpha_iters
        self.rel_tol = rel_tol
        self.max_sweeps = max_sweeps
        self.rho0 = rho0
        self.random_state = random_state

    def fit(self, X, y, mask=None):
        """Fit on k-space grids ``X`` and clean targets ``y``.

        ``mask`` is a boolean sampling pattern shared by all measurements,
        or one pattern per measurement.
        """
        kspaces = as_image_stack(X, "X")
        clean = as_image_stack(y, "y")
        if len(kspaces) != len(clean):
            raise ValueError("X and y must contain equally many images")
        if mask is None:
            raise ValueError("mask is required for k-space data")
        masks = self._broadcast_masks(mask, len(kspaces))
        problems = [MriProblem(k, m) for k, m in zip(kspaces, masks)]
        self.model_, self.history_ = train_network(
            clean, problems, KIND_MRI, self._config()
        )
        self.mask_ = masks[0]
        return self

    def predict(self, X, mask=None):
        """Reconstruct each k-space grid in ``X``."""
        self._check_fitted()
        kspaces = as_image_stack(X, "X")
        if mask is None:
            masks = [self.mask_] * len(kspaces)
        else:
            masks = self._broadcast_masks(mask, len(kspaces))
        return np.stack(
            [
                recover(self.model_, MriProblem(k, m))[0]
                for k, m in zip(kspaces, masks)
            ]
        )

    @staticmethod
    def _broadcast_masks(mask, n):
        mask = np.asarray(mask)
        if mask.ndim == 2:
            return [mask.astype(bool)] * n
        masks = as_image_stack(mask, "mask", dtype=float)
        if len(masks) != n:
            raise ValueError("need one mask per measurement or a single shared mask")
        return [m.astype(bool) for m in masks]
