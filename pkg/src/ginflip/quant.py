"""INT8 scale quantization, straight-through estimation, and the bit-level view.

Codes live in two's complement with a symmetric per-tensor scale
s = max|W| / clip_hi, computed once when a tensor is first quantized and kept
frozen from then on.  Only weight matrices are quantized; biases stay full
precision and are not attackable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BitAddressError, ContractError
from .tensor import as_matrix

DEFAULT_CLIP_RANGE = (-128, 127)

#: Two's-complement place value of each bit position (0 = LSB, 7 = sign).
BIT_PLACE_VALUES = np.array([1, 2, 4, 8, 16, 32, 64, -128], dtype=np.float64)


@dataclass(frozen=True)
class QuantizedTensor:
    """Signed 8-bit codes plus the positive real scale that dequantizes them."""

    codes: np.ndarray
    scale: float
    clip_range: tuple[int, int] = DEFAULT_CLIP_RANGE

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.int8)
        if codes.ndim != 2:
            raise ContractError("codes must be a matrix")
        lo, hi = self.clip_range
        if not (-128 <= lo < 0 <= hi <= 127):
            raise ContractError(f"invalid clip range {self.clip_range}")
        if codes.size and (codes.min() < lo or codes.max() > hi):
            raise ContractError("codes outside clip range")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ContractError("scale must be positive and finite")
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)

    @property
    def shape(self) -> tuple[int, int]:
        return self.codes.shape

    @property
    def size(self) -> int:
        return self.codes.size


@dataclass(frozen=True, order=True)
class BitAddress:
    """One bit of one element of one named quantized tensor."""

    tensor_name: str
    element_index: int
    bit_position: int

    def __post_init__(self):
        if not 0 <= self.bit_position <= 7:
            raise BitAddressError(f"bit position {self.bit_position} outside 0..7")
        if self.element_index < 0:
            raise BitAddressError("element index must be non-negative")


def _round_half_away_from_zero(x: np.ndarray) -> np.ndarray:
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


def quantize(
    w, scale: float | None = None, clip_range: tuple[int, int] = DEFAULT_CLIP_RANGE
) -> QuantizedTensor:
    """Map reals to INT8 codes: clip(round(W / s), lo, hi).

    Without an explicit ``scale``, s = max|W| / clip_hi (s = 1 for an
    all-zero tensor).  Rounding is half away from zero.
    """
    arr = as_matrix(w)
    if scale is None:
        peak = float(np.abs(arr).max()) if arr.size else 0.0
        scale = peak / clip_range[1] if peak > 0 else 1.0
    codes = np.clip(
        _round_half_away_from_zero(arr / scale), clip_range[0], clip_range[1]
    ).astype(np.int8)
    return QuantizedTensor(codes, scale, clip_range)


def dequantize(q: QuantizedTensor) -> np.ndarray:
    """Elementwise code * scale."""
    return q.codes.astype(np.float64) * q.scale


def ste_backward(upstream_grad, pre_quant_values, clip_bounds) -> np.ndarray:
    """Clipped straight-through estimate of the quantizer's gradient.

    Passes the upstream gradient where the pre-quantization value lies inside
    the real-valued clip interval [lo, hi]; zero outside.
    """
    g = np.asarray(upstream_grad, dtype=np.float64)
    w = np.asarray(pre_quant_values, dtype=np.float64)
    if g.shape != w.shape:
        raise ContractError(f"shape mismatch {g.shape} vs {w.shape}")
    lo, hi = clip_bounds
    return g * ((w >= lo) & (w <= hi))


def code_bits(q: QuantizedTensor) -> np.ndarray:
    """(size x 8) matrix of bits; column i is bit i (0 = LSB, 7 = sign)."""
    u = q.codes.reshape(-1).view(np.uint8)
    return ((u[:, None] >> np.arange(8, dtype=np.uint8)) & 1).astype(np.uint8)


def flip_bit(q: QuantizedTensor, addr: BitAddress) -> QuantizedTensor:
    """Toggle exactly one bit of one code; scale unchanged; an involution."""
    if not 0 <= addr.element_index < q.size:
        raise BitAddressError(
            f"element {addr.element_index} outside tensor of size {q.size}"
        )
    codes = q.codes.copy()
    flat = codes.reshape(-1).view(np.uint8)
    flat[addr.element_index] ^= np.uint8(1 << addr.bit_position)
    lo, hi = q.clip_range
    new = int(codes.reshape(-1)[addr.element_index])
    if not lo <= new <= hi:
        # Only reachable with a narrowed clip range; the full INT8 range
        # admits every single-bit mutation.
        raise BitAddressError(f"flip would leave the clip range: code {new}")
    return QuantizedTensor(codes, q.scale, q.clip_range)


def bit_gradients(weight_grad, q: QuantizedTensor) -> np.ndarray:
    """(size x 8) loss gradients of the code bits.

    dL/db_i = dL/dw_hat * s * 2^i for i in 0..6 and * (-2^7) for the sign
    bit, matching the two's-complement place values of the dequantized
    weight.  Linear in ``weight_grad``.
    """
    g = np.asarray(weight_grad, dtype=np.float64)
    if g.shape != q.shape:
        raise ContractError(f"gradient shape {g.shape} vs codes {q.shape}")
    return np.outer(g.reshape(-1) * q.scale, BIT_PLACE_VALUES)


def ascending_flip_mask(codes_bits: np.ndarray, bit_grads: np.ndarray) -> np.ndarray:
    """Bits whose flip moves the weight along the gradient-ascending direction.

    A bit qualifies iff it is 0 with a positive bit-gradient or 1 with a
    negative one; zero gradient never qualifies.  Negate the gradients to
    obtain the descending mask.
    """
    bits = np.asarray(codes_bits)
    grads = np.asarray(bit_grads, dtype=np.float64)
    if bits.shape != grads.shape:
        raise ContractError(f"shape mismatch {bits.shape} vs {grads.shape}")
    return ((bits == 0) & (grads > 0)) | ((bits == 1) & (grads < 0))
