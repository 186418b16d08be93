"""Iterative recovery: alternate the learned mapping with an exact
data-fit update minimizing f(x; y) + lam * ||x - z||^2.

Two forward models are supported: denoising (f = ||y - x||^2, image-domain
measurement) and undersampled Fourier sampling (f = ||y - P F x||^2 with a
boolean k-space mask and the unitary 2-D DFT). Both x-updates are exact
minimizers in closed form.
"""

import numpy as np

from .mapping import LayerMapping, apply_mapping
from .ops import fft2_unitary, ifft2_unitary

__all__ = [
    "DenoisingProblem",
    "MriProblem",
    "RecoveryModel",
    "RecoveryTrace",
    "recover",
    "x_update_denoise",
    "x_update_mri",
    "x_update",
    "data_fit",
    "zero_fill",
    "KIND_DENOISE",
    "KIND_MRI",
]

KIND_DENOISE = "denoise"
KIND_MRI = "mri"


class DenoisingProblem:
    """Image-domain measurement y = x + noise."""

    kind = KIND_DENOISE

    def __init__(self, y):
        y = np.asarray(y)
        if y.ndim != 2:
            raise ValueError("measurement must be a 2-D image")
        self.y = y

    @property
    def shape(self):
        return self.y.shape


class MriProblem:
    """Masked k-space measurement y = P F x + noise (zeros off the mask)."""

    kind = KIND_MRI

    def __init__(self, y, mask):
        y = np.asarray(y)
        mask = np.asarray(mask, dtype=bool)
        if y.ndim != 2:
            raise ValueError("k-space measurement must be a 2-D grid")
        if mask.shape != y.shape:
            raise ValueError(f"mask shape {mask.shape} != measurement shape {y.shape}")
        self.y = y
        self.mask = mask

    @property
    def shape(self):
        return self.y.shape


class RecoveryModel:
    """Ordered mapping layers plus the data-fit weight and problem kind."""

    def __init__(self, layers, lam, kind):
        layers = list(layers)
        for layer in layers:
            if not isinstance(layer, LayerMapping):
                raise TypeError("layers must be LayerMapping instances")
        if lam <= 0:
            raise ValueError("lam must be positive")
        if kind not in (KIND_DENOISE, KIND_MRI):
            raise ValueError(f"unknown problem kind {kind!r}")
        self.layers = layers
        self.lam = float(lam)
        self.kind = kind

    @property
    def n_layers(self):
        return len(self.layers)


class RecoveryTrace:
    """Per-layer iterates and costs f(x; y) + lam * ||x - z||^2."""

    def __init__(self, images, costs):
        self.images = list(images)
        self.costs = list(costs)


def x_update_denoise(y, z, lam):
    """Exact minimizer of ||y - x||^2 + lam * ||x - z||^2."""
    y = np.asarray(y)
    z = np.asarray(z)
    if y.shape != z.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {z.shape}")
    return (y + lam * z) / (1.0 + lam)


def x_update_mri(y, mask, z, lam):
    """Exact minimizer of ||y - P F x||^2 + lam * ||x - z||^2.

    The unitary DFT diagonalizes the normal equations: sampled bins blend
    measurement and mapping output, unsampled bins copy the mapping output.
    """
    y = np.asarray(y)
    mask = np.asarray(mask, dtype=bool)
    z = np.asarray(z)
    if mask.shape != y.shape or z.shape != y.shape:
        raise ValueError(
            f"shape mismatch: y {y.shape}, mask {mask.shape}, z {z.shape}"
        )
    zf = fft2_unitary(z)
    xf = np.where(mask, (y + lam * zf) / (1.0 + lam), zf)
    return ifft2_unitary(xf)


def x_update(problem, z, lam):
    """Dispatch the closed-form x-update for the given forward problem."""
    if problem.kind == KIND_DENOISE:
        return x_update_denoise(problem.y, z, lam)
    return x_update_mri(problem.y, problem.mask, z, lam)


def data_fit(problem, x):
    """Evaluate f(x; y) for the problem's forward model."""
    if problem.kind == KIND_DENOISE:
        return float(np.sum(np.abs(problem.y - x) ** 2))
    resid = problem.y - problem.mask * fft2_unitary(x)
    return float(np.sum(np.abs(resid) ** 2))


def zero_fill(problem):
    """Default starting image: the measurement itself for denoising, the
    zero-filled inverse DFT for masked k-space data."""
    if problem.kind == KIND_DENOISE:
        return np.array(problem.y)
    return ifft2_unitary(np.where(problem.mask, problem.y, 0))


def recover(model, problem, x0=None):
    """Run the layered recovery and return (final image, trace).

    Each layer i maps the current iterate to z and solves the data-fit
    update x = argmin f(x; y) + lam * ||x - z||^2 exactly. The trace holds
    every iterate (x0 first) and the per-layer cost values.
    """
    if model.kind != problem.kind:
        raise ValueError(
            f"model kind {model.kind!r} does not match problem kind {problem.kind!r}"
        )
    x = np.array(x0) if x0 is not None else zero_fill(problem)
    if x.shape != problem.shape:
        raise ValueError(f"x0 shape {x.shape} != measurement shape {problem.shape}")
    images = [x]
    costs = []
    for layer in model.layers:
        z = apply_mapping(layer, x)
        x = x_update(problem, z, model.lam)
        images.append(x)
        costs.append(data_fit(problem, x) + model.lam * float(np.sum(np.abs(x - z) ** 2)))
    return x, RecoveryTrace(images, costs)
