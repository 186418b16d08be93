"""Binary file formats, config parsing, and metrics CSV export.

All formats are little-endian and platform independent:

* image "CIMG":  magic ``CIMG``, u32 version=1, u32 height, u32 width,
  u8 dtype (0 = real f64, 1 = complex f64 interleaved re,im), then the
  row-major f64 payload.
* mask "CMSK":   magic ``CMSK``, u32 version=1, u32 height, u32 width,
  then height*width bytes of 0/1, row-major.
* model "BCDN":  magic ``BCDN``, u32 version=1, u32 n_layers, u32 K,
  u32 patch_h, u32 patch_w, u8 problem kind (0 = denoise, 1 = mri),
  f64 lam; per layer K f64 thresholds followed by K filters of
  patch_h*patch_w complex f64 each (re,im interleaved, row-major).

The training/recovery config is a flat ``key=value`` text file with ``#``
comments; unknown keys are rejected.
"""

import struct

import numpy as np

from .mapping import LayerMapping
from .recovery import KIND_DENOISE, KIND_MRI, RecoveryModel

__all__ = [
    "FormatError",
    "ConfigError",
    "write_image",
    "read_image",
    "image_to_bytes",
    "image_from_bytes",
    "write_mask",
    "read_mask",
    "serialize_model",
    "deserialize_model",
    "write_model",
    "read_model",
    "parse_config",
    "load_config",
    "write_metrics_csv",
    "write_training_csv",
    "CONFIG_KEYS",
]

IMAGE_MAGIC = b"CIMG"
MASK_MAGIC = b"CMSK"
MODEL_MAGIC = b"BCDN"
FORMAT_VERSION = 1

_KIND_CODES = {KIND_DENOISE: 0, KIND_MRI: 1}
_KIND_NAMES = {0: KIND_DENOISE, 1: KIND_MRI}


class FormatError(ValueError):
    """Malformed binary file; ``offset`` is the failing byte position."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class ConfigError(ValueError):
    """Invalid configuration file contents."""


class _Reader:
    def __init__(self, data):
        self.data = data
        self.offset = 0

    def take(self, n, what):
        if self.offset + n > len(self.data):
            raise FormatError(f"truncated file while reading {what}", self.offset)
        chunk = self.data[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def u32(self, what):
        return struct.unpack("<I", self.take(4, what))[0]

    def u8(self, what):
        return self.take(1, what)[0]

    def f64(self, what):
        return struct.unpack("<d", self.take(8, what))[0]


def _check_magic(reader, magic):
    got = reader.take(len(magic), "magic")
    if got != magic:
        raise FormatError(f"bad magic {got!r}, expected {magic!r}", 0)
    version = reader.u32("version")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}", 4)


def image_to_bytes(img):
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError("image must be 2-D")
    h, w = img.shape
    is_complex = np.iscomplexobj(img)
    header = IMAGE_MAGIC + struct.pack("<IIIB", FORMAT_VERSION, h, w, 1 if is_complex else 0)
    if is_complex:
        payload = np.ascontiguousarray(img, dtype=np.complex128)
        flat = payload.view(np.float64).reshape(-1)
    else:
        flat = np.ascontiguousarray(img, dtype=np.float64).reshape(-1)
    return header + flat.astype("<f8", copy=False).tobytes()


def image_from_bytes(data):
    r = _Reader(data)
    _check_magic(r, IMAGE_MAGIC)
    h = r.u32("height")
    w = r.u32("width")
    dtype = r.u8("dtype")
    if dtype not in (0, 1):
        raise FormatError(f"unknown dtype code {dtype}", r.offset - 1)
    count = h * w * (2 if dtype else 1)
    raw = r.take(8 * count, "pixel payload")
    values = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    if dtype:
        return values.view(np.complex128).reshape(h, w)
    return values.reshape(h, w)


def write_image(path, img):
    with open(path, "wb") as fh:
        fh.write(image_to_bytes(img))


def read_image(path):
    with open(path, "rb") as fh:
        return image_from_bytes(fh.read())


def write_mask(path, mask):
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ValueError("mask must be 2-D")
    h, w = mask.shape
    header = MASK_MAGIC + struct.pack("<III", FORMAT_VERSION, h, w)
    with open(path, "wb") as fh:
        fh.write(header + mask.astype(np.uint8).tobytes())


def read_mask(path):
    with open(path, "rb") as fh:
        data = fh.read()
    r = _Reader(data)
    _check_magic(r, MASK_MAGIC)
    h = r.u32("height")
    w = r.u32("width")
    raw = r.take(h * w, "mask payload")
    values = np.frombuffer(raw, dtype=np.uint8)
    if np.any(values > 1):
        raise FormatError("mask bytes must be 0 or 1", r.offset - h * w)
    return values.reshape(h, w).astype(bool)


def serialize_model(model):
    """Serialize a recovery model to BCDN bytes."""
    if model.n_layers:
        k = model.layers[0].n_filters
        ph, pw = model.layers[0].patch_shape
        for layer in model.layers:
            if layer.n_filters != k or layer.patch_shape != (ph, pw):
                raise ValueError("all layers must share filter count and patch shape")
    else:
        k, ph, pw = 0, 0, 0
    out = bytearray()
    out += MODEL_MAGIC
    out += struct.pack(
        "<IIIII", FORMAT_VERSION, model.n_layers, k, ph, pw
    )
    out += struct.pack("<Bd", _KIND_CODES[model.kind], model.lam)
    for layer in model.layers:
        out += layer.thresholds.astype("<f8").tobytes()
        # column-by-column so each filter's taps are contiguous
        out += np.ascontiguousarray(layer.filters.T, dtype=np.complex128).view(
            np.float64
        ).astype("<f8", copy=False).tobytes()
    return bytes(out)


def deserialize_model(data):
    """Parse BCDN bytes back into a recovery model."""
    r = _Reader(data)
    _check_magic(r, MODEL_MAGIC)
    n_layers = r.u32("layer count")
    k = r.u32("filter count")
    ph = r.u32("patch height")
    pw = r.u32("patch width")
    kind_code = r.u8("problem kind")
    if kind_code not in _KIND_NAMES:
        raise FormatError(f"unknown problem kind code {kind_code}", r.offset - 1)
    lam = r.f64("lam")
    layers = []
    for _ in range(n_layers):
        raw = r.take(8 * k, "thresholds")
        thresholds = np.frombuffer(raw, dtype="<f8").astype(np.float64)
        raw = r.take(16 * k * ph * pw, "filters")
        flat = np.frombuffer(raw, dtype="<f8").astype(np.float64).view(np.complex128)
        filters = flat.reshape(k, ph * pw).T.copy()
        layers.append(LayerMapping(filters, thresholds, (ph, pw)))
    if r.offset != len(data):
        raise FormatError("trailing bytes after model payload", r.offset)
    return RecoveryModel(layers, lam, _KIND_NAMES[kind_code])


def write_model(path, model):
    with open(path, "wb") as fh:
        fh.write(serialize_model(model))


def read_model(path):
    with open(path, "rb") as fh:
        return deserialize_model(fh.read())


CONFIG_KEYS = {
    "problem": str,
    "lambda": float,
    "sigma": float,
    "layers": int,
    "filters_k": int,
    "patch_h": int,
    "patch_w": int,
    "n_patches": int,
    "admm_iters": int,
    "v_iters": int,
    "alpha_iters": int,
    "rel_tol": float,
    "max_sweeps": int,
    "rho0": float,
    "rate": float,
    "center_fraction": float,
    "seed": int,
    "paths": str,
}


def parse_config(text):
    """Parse flat ``key=value`` config text; unknown keys are rejected."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        caster = CONFIG_KEYS[key]
        try:
            values[key] = caster(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {value!r}") from exc
    if "problem" in values and values["problem"] not in (KIND_DENOISE, KIND_MRI):
        raise ConfigError(
            f"problem must be {KIND_DENOISE!r} or {KIND_MRI!r}, got {values['problem']!r}"
        )
    return values


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _format_value(x):
    return f"{x:.12e}"


def write_metrics_csv(path, rows):
    """Write per-layer recovery metrics: ``layer,psnr_db,layer_cost``."""
    rows = list(rows)
    if not rows:
        raise ValueError("metrics trace must be nonempty")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("layer,psnr_db,layer_cost\n")
        for layer, psnr_db, cost in rows:
            fh.write(f"{layer},{_format_value(psnr_db)},{_format_value(cost)}\n")


def write_training_csv(path, rows):
    """Write per-block training objectives: ``layer,sweep,block,objective``."""
    rows = list(rows)
    if not rows:
        raise ValueError("training trace must be nonempty")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("layer,sweep,block,objective\n")
        for layer, sweep, block, objective in rows:
            fh.write(f"{layer},{sweep},{block},{_format_value(objective)}\n")
