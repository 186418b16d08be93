"""BCD-Net: layer-wise trained filter/threshold networks for image recovery.

The package trains a stack of encoding-decoding mapping layers (one filter
matrix and one threshold vector per layer) by block coordinate descent with
an ADMM filter update, then recovers images by alternating the learned
mapping with an exact data-fit update. Supported forward models are additive
white Gaussian noise (denoising) and undersampled Fourier sampling
(MRI-style reconstruction).
"""

from .ops import (
    soft_threshold,
    fft2_unitary,
    ifft2_unitary,
    extract_patches,
    aggregate_patches,
    psnr,
)
from .mapping import LayerMapping, apply_mapping, init_dct_filters
from .recovery import (
    DenoisingProblem,
    MriProblem,
    RecoveryModel,
    RecoveryTrace,
    recover,
    x_update_denoise,
    x_update_mri,
    zero_fill,
)
from .training import (
    TrainingConfig,
    TrainingSet,
    train_network,
    train_layer,
    mapping_objective,
)
from .simulate import gen_phantom, add_awgn, gen_mask, simulate_kspace
from .estimators import BCDNetDenoiser, BCDNetReconstructor

__version__ = "0.1.0"

__all__ = [
    "soft_threshold",
    "fft2_unitary",
    "ifft2_unitary",
    "extract_patches",
    "aggregate_patches",
    "psnr",
    "LayerMapping",
    "apply_mapping",
    "init_dct_filters",
    "DenoisingProblem",
    "MriProblem",
    "RecoveryModel",
    "RecoveryTrace",
    "recover",
    "x_update_denoise",
    "x_update_mri",
    "zero_fill",
    "TrainingConfig",
    "TrainingSet",
    "train_network",
    "train_layer",
    "mapping_objective",
    "gen_phantom",
    "add_awgn",
    "gen_mask",
    "simulate_kspace",
    "BCDNetDenoiser",
    "BCDNetReconstructor",
    "__version__",
]
