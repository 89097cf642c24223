"""Grayscale image I/O, noise injection, and the synthetic multi-focus pair
generator used by the test harness.

Images are 2-d float64 arrays with a nominal pixel range of [0, 255]. Only
binary PGM (P5, maxval 255) is supported; writing rounds to nearest (ties to
even) and clamps, so integer-valued in-range images round-trip exactly.

Randomness uses numpy's default generator (PCG64) seeded explicitly, so every
noisy operation is reproducible from its seed argument.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "PgmFormatError",
    "read_pgm",
    "write_pgm",
    "load_pgm",
    "save_pgm",
    "add_gaussian_noise",
    "gaussian_blur",
    "synth_multifocus",
]


class PgmFormatError(ValueError):
    """Malformed PGM data; ``offset`` is the byte position of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def _check_image(image, name="image"):
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.size == 0:
        raise ValueError(f"{name} must be a nonempty 2-d array")
    if not np.all(np.isfinite(image)):
        raise ValueError(f"{name} contains non-finite pixels")
    return image


_WHITESPACE = b" \t\n\r\x0b\x0c"


def _next_token(data, pos):
    # Skip whitespace and '#' comments, then collect one token.
    while pos < len(data):
        ch = data[pos:pos + 1]
        if ch in (b"#",):
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
        elif ch in _WHITESPACE:
            pos += 1
        else:
            break
    if pos >= len(data):
        raise PgmFormatError("unexpected end of header", pos)
    start = pos
    while pos < len(data) and data[pos:pos + 1] not in _WHITESPACE:
        pos += 1
    return data[start:pos], pos


def read_pgm(data):
    """Decode binary PGM (P5, maxval 255) bytes into an image array."""
    if not isinstance(data, (bytes, bytearray)):
        raise TypeError("read_pgm expects bytes")
    data = bytes(data)
    magic, pos = _next_token(data, 0)
    if magic != b"P5":
        raise PgmFormatError(f"unsupported magic {magic!r}, only P5 accepted", 0)
    fields = []
    for name in ("width", "height", "maxval"):
        token, pos = _next_token(data, pos)
        try:
            value = int(token)
        except ValueError:
            raise PgmFormatError(f"invalid {name} token {token!r}",
                                 pos - len(token)) from None
        if value <= 0:
            raise PgmFormatError(f"{name} must be positive, got {value}",
                                 pos - len(token))
        fields.append(value)
    width, height, maxval = fields
    if maxval != 255:
        raise PgmFormatError(f"unsupported maxval {maxval}, only 255 accepted",
                             pos - len(str(maxval)))
    if pos >= len(data) or data[pos:pos + 1] not in _WHITESPACE:
        raise PgmFormatError("missing whitespace before pixel payload", pos)
    pos += 1
    expected = width * height
    payload = data[pos:pos + expected]
    if len(payload) < expected:
        raise PgmFormatError(
            f"truncated payload: expected {expected} bytes, found {len(payload)}",
            len(data),
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
    return pixels.reshape(height, width)


def write_pgm(image):
    """Encode an image as binary PGM bytes (rounded and clamped to 0..255)."""
    image = _check_image(image)
    height, width = image.shape
    arr = np.clip(np.rint(image), 0.0, 255.0).astype(np.uint8)
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    return header + arr.tobytes()


def load_pgm(path):
    with open(path, "rb") as fh:
        return read_pgm(fh.read())


def save_pgm(path, image):
    with open(path, "wb") as fh:
        fh.write(write_pgm(image))


def add_gaussian_noise(image, sigma, seed):
    """Add i.i.d. zero-mean Gaussian noise with standard deviation ``sigma``.

    No clamping is applied; downstream solvers see the unclamped values.
    """
    image = _check_image(image)
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    if sigma == 0:
        return image.copy()
    rng = np.random.default_rng(seed)
    return image + rng.normal(0.0, sigma, size=image.shape)


def gaussian_kernel(sigma):
    """Normalized truncated Gaussian kernel with radius ceil(3*sigma)."""
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    if sigma == 0:
        return np.ones(1)
    radius = int(math.ceil(3.0 * sigma))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(offsets ** 2) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def _convolve_axis(image, kernel, axis):
    radius = (kernel.size - 1) // 2
    if radius == 0:
        return image * kernel[0]
    pad = [(0, 0), (0, 0)]
    pad[axis] = (radius, radius)
    padded = np.pad(image, pad, mode="symmetric")
    out = np.zeros_like(image)
    length = image.shape[axis]
    for k, w in enumerate(kernel):
        if axis == 0:
            out += w * padded[k:k + length, :]
        else:
            out += w * padded[:, k:k + length]
    return out


def gaussian_blur(image, sigma_b):
    """Separable Gaussian blur with symmetric (reflective) boundary handling.

    ``sigma_b = 0`` returns a copy of the input unchanged.
    """
    image = _check_image(image)
    kernel = gaussian_kernel(sigma_b)
    if kernel.size == 1:
        return image.copy()
    return _convolve_axis(_convolve_axis(image, kernel, 0), kernel, 1)


def synth_multifocus(truth, sigma_b, split):
    """Produce a two-image multi-focus pair from a ground-truth image.

    The whole image is blurred once, then composited by a column mask: the
    first output is sharp left of ``split`` and blurred from ``split`` on,
    the second is the opposite. Returns (focus_left, focus_right).
    """
    truth = _check_image(truth)
    width = truth.shape[1]
    if not 0 < split < width:
        raise ValueError(f"split must be inside (0, {width}), got {split}")
    blurred = gaussian_blur(truth, sigma_b)
    focus_left = truth.copy()
    focus_left[:, split:] = blurred[:, split:]
    focus_right = blurred.copy()
    focus_right[:, split:] = truth[:, split:]
    return focus_left, focus_right
