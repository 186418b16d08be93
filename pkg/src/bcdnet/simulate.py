"""Test-problem generation: synthetic phantoms, Gaussian noise,
variable-density k-space sampling masks, and k-space measurement synthesis
from a supersampled phantom (so the measurement model is finer than the
reconstruction grid).
"""

import numpy as np

from .ops import fft2_unitary

__all__ = ["gen_phantom", "add_awgn", "gen_mask", "simulate_kspace"]

PHANTOM_KINDS = ("ellipses", "blocks")

# fully sampled low-frequency square: fraction of the sample budget
DEFAULT_CENTER_FRACTION = 0.3


def gen_phantom(kind, height, width, seed, with_phase=False):
    """Deterministic piecewise-smooth phantom with magnitude in [0, 1].

    ``kind`` is "ellipses" (overlapping ellipses on a large base ellipse) or
    "blocks" (axis-aligned constant rectangles). With ``with_phase`` the
    result is complex with a smooth low-frequency synthetic phase.
    """
    if kind not in PHANTOM_KINDS:
        raise ValueError(f"unknown phantom kind {kind!r}; choose from {PHANTOM_KINDS}")
    if height < 8 or width < 8:
        raise ValueError("phantom must be at least 8x8")
    rng = np.random.default_rng(seed)
    rr, cc = np.meshgrid(
        (np.arange(height) - height / 2) / (height / 2),
        (np.arange(width) - width / 2) / (width / 2),
        indexing="ij",
    )
    img = np.zeros((height, width))
    if kind == "ellipses":
        a0 = rng.uniform(0.62, 0.80)
        b0 = rng.uniform(0.62, 0.80)
        base = (rr / a0) ** 2 + (cc / b0) ** 2 <= 1.0
        img[base] = rng.uniform(0.25, 0.45)
        for _ in range(rng.integers(4, 8)):
            ca, cb = rng.uniform(-0.45, 0.45, size=2)
            ea = rng.uniform(0.08, 0.35)
            eb = rng.uniform(0.08, 0.35)
            theta = rng.uniform(0, np.pi)
            ur = (rr - ca) * np.cos(theta) + (cc - cb) * np.sin(theta)
            uc = -(rr - ca) * np.sin(theta) + (cc - cb) * np.cos(theta)
            inside = (ur / ea) ** 2 + (uc / eb) ** 2 <= 1.0
            img[inside & base] += rng.uniform(-0.3, 0.55)
    else:
        for _ in range(rng.integers(5, 10)):
            r0, r1 = np.sort(rng.integers(0, height, size=2))
            c0, c1 = np.sort(rng.integers(0, width, size=2))
            img[r0 : r1 + 1, c0 : c1 + 1] += rng.uniform(0.15, 0.5)
    img = np.clip(img, 0.0, 1.0)
    if not with_phase:
        return img
    fr = rng.uniform(0.5, 1.5, size=2)
    shift = rng.uniform(0, 2 * np.pi, size=2)
    amp = rng.uniform(0.3, 0.9)
    phase = amp * (
        np.sin(2 * np.pi * fr[0] * rr / 2 + shift[0])
        + np.cos(2 * np.pi * fr[1] * cc / 2 + shift[1])
    ) / 2.0
    return img * np.exp(1j * phase)


def add_awgn(img, sigma, seed, complex_noise=False):
    """Add i.i.d. zero-mean Gaussian noise of std ``sigma`` per component.

    With ``complex_noise`` both real and imaginary parts receive independent
    noise of std ``sigma``. ``sigma = 0`` returns an unmodified copy.
    """
    img = np.asarray(img)
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return img.copy()
    rng = np.random.default_rng(seed)
    noise = rng.normal(scale=sigma, size=img.shape)
    if complex_noise:
        noise = noise + 1j * rng.normal(scale=sigma, size=img.shape)
    return img + noise


def gen_mask(height, width, rate, center_fraction=DEFAULT_CENTER_FRACTION, seed=0):
    """Variable-density boolean sampling mask with an exact sample count.

    Exactly ``round(rate * height * width)`` entries are True: a fully
    sampled centered square of side ``ceil(sqrt(center_fraction * budget))``
    plus samples drawn without replacement with probability proportional to
    ``(1 + |k| / k0)^-2`` in centered frequency coordinates, k0 =
    max(height, width) / 16. The returned mask indexes the unshifted DFT
    grid (DC at [0, 0]).
    """
    if not 0 < rate <= 1:
        raise ValueError("rate must be in (0, 1]")
    if not 0 <= center_fraction < 1:
        raise ValueError("center_fraction must be in [0, 1)")
    budget = int(round(rate * height * width))
    if budget < 1:
        raise ValueError("rate too small: zero samples requested")
    mask = np.zeros((height, width), dtype=bool)
    if budget == height * width:
        return ~mask

    side = int(np.ceil(np.sqrt(center_fraction * budget)))
    if side**2 > budget or side > min(height, width):
        raise ValueError(
            f"fully sampled center of side {side} exceeds the sample budget"
        )
    r0 = height // 2 - side // 2
    c0 = width // 2 - side // 2
    mask[r0 : r0 + side, c0 : c0 + side] = True

    remaining = budget - side**2
    if remaining > 0:
        kr = np.arange(height) - height // 2
        kc = np.arange(width) - width // 2
        radius = np.hypot(kr[:, None], kc[None, :])
        k0 = max(height, width) / 16.0
        prob = (1.0 + radius / k0) ** -2
        prob[mask] = 0.0
        flat = prob.ravel()
        flat = flat / flat.sum()
        rng = np.random.default_rng(seed)
        chosen = rng.choice(height * width, size=remaining, replace=False, p=flat)
        mask.ravel()[chosen] = True
    return np.fft.ifftshift(mask)


def simulate_kspace(phantom_hi, target_h, target_w, mask, sigma_k=0.0, seed=0):
    """Synthesize masked k-space data on a coarser grid than the phantom.

    Takes the unitary DFT of the high-resolution phantom, keeps the central
    ``target_h x target_w`` frequency band rescaled to the coarse grid's
    unitary convention, zeroes everything off the mask, and adds complex
    Gaussian noise of std ``sigma_k`` on the sampled bins.
    """
    phantom_hi = np.asarray(phantom_hi)
    hh, wh = phantom_hi.shape
    if hh % target_h or wh % target_w:
        raise ValueError(
            f"phantom shape {phantom_hi.shape} is not an integer multiple of "
            f"target shape ({target_h}, {target_w})"
        )
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (target_h, target_w):
        raise ValueError(f"mask shape {mask.shape} != target shape ({target_h}, {target_w})")
    m_r = hh // target_h
    m_c = wh // target_w
    spectrum = np.fft.fftshift(fft2_unitary(phantom_hi))
    r0 = hh // 2 - target_h // 2
    c0 = wh // 2 - target_w // 2
    band = spectrum[r0 : r0 + target_h, c0 : c0 + target_w]
    kspace = np.fft.ifftshift(band) / np.sqrt(m_r * m_c)
    if sigma_k > 0:
        rng = np.random.default_rng(seed)
        noise = rng.normal(scale=sigma_k, size=kspace.shape)
        noise = noise + 1j * rng.normal(scale=sigma_k, size=kspace.shape)
        kspace = kspace + noise
    return np.where(mask, kspace, 0)
