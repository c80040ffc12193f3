"""Radix-2 FFT with cached plans.

The transform is implemented in-repo (iterative Cooley-Tukey over the last
axis) so the audio front-end carries no external transform dependency and
its per-frame cost stays visible to the benchmark harness. Power-of-two
sizes only; all transforms run in float64/complex128.
"""

from __future__ import annotations

import numpy as np

_PLANS: dict[tuple[int, bool], tuple[np.ndarray, list[np.ndarray]]] = {}


def _plan(n: int, inverse: bool):
    key = (n, inverse)
    plan = _PLANS.get(key)
    if plan is None:
        if n < 2 or n & (n - 1):
            raise ValueError(f"transform size must be a power of two >= 2, got {n}")
        bits = n.bit_length() - 1
        perm = np.arange(n)
        rev = np.zeros(n, dtype=np.intp)
        for _ in range(bits):
            rev = (rev << 1) | (perm & 1)
            perm >>= 1
        sign = 2j if inverse else -2j
        twiddles = []
        m = 2
        while m <= n:
            twiddles.append(np.exp(sign * np.pi * np.arange(m // 2) / m))
            m *= 2
        plan = (rev, twiddles)
        _PLANS[key] = plan
    return plan


def fft(x: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Complex DFT along the last axis; leading axes are batched."""
    x = np.asarray(x)
    n = x.shape[-1]
    perm, twiddles = _plan(n, inverse)
    lead = x.shape[:-1]
    y = x[..., perm].astype(np.complex128, copy=False)
    half = 1
    for w in twiddles:
        m = half * 2
        y = y.reshape(lead + (n // m, m))
        upper = y[..., half:] * w
        lower = y[..., :half]
        y = np.concatenate([lower + upper, lower - upper], axis=-1)
        half = m
    y = y.reshape(lead + (n,))
    if inverse:
        y = y / n
    return y


def rfft(x: np.ndarray) -> np.ndarray:
    """DFT of real input; returns the n//2 + 1 non-redundant bins."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    return fft(x.astype(np.complex128))[..., : n // 2 + 1]


def irfft(spec: np.ndarray, n: int | None = None) -> np.ndarray:
    """Inverse of :func:`rfft`; expands the Hermitian half-spectrum."""
    spec = np.asarray(spec, dtype=np.complex128)
    n_bins = spec.shape[-1]
    if n is None:
        n = 2 * (n_bins - 1)
    if n != 2 * (n_bins - 1):
        raise ValueError(f"size {n} inconsistent with {n_bins} bins")
    full = np.empty(spec.shape[:-1] + (n,), dtype=np.complex128)
    full[..., :n_bins] = spec
    full[..., n_bins:] = np.conj(spec[..., -2:0:-1])
    return fft(full, inverse=True).real
