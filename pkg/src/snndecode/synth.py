"""Synthetic spike streams with known latent velocities.

Stands in for cortical recordings during desk-scale work: a seeded
low-pass-filtered noise process plays the role of the 2-D fingertip
velocity, each channel fires at a rectified linear mixture of it, and
spike counts are drawn from a Poisson sampler.  The same seed always
reproduces the same stream bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import SpikeStream, Trajectory

__all__ = ["SynthSpec", "gen_synth"]

MAX_COUNT = 255  # spike-file payloads store one byte per bin


@dataclass(frozen=True)
class SynthSpec:
    channels: int
    duration_steps: int
    rate_scale: float = 1.0
    smoothness: float = 0.02  # low-pass cutoff as a fraction of the bin rate
    seed: int = 0
    bin_ms: float = 4.0

    def __post_init__(self):
        if self.channels < 1 or self.duration_steps < 0:
            raise ValueError("channels must be >= 1 and duration_steps >= 0")
        if self.rate_scale < 0:
            raise ValueError("rate_scale must be non-negative")
        if not 0 < self.smoothness <= 0.5:
            raise ValueError("smoothness must lie in (0, 0.5]")
        if self.bin_ms <= 0:
            raise ValueError("bin_ms must be positive")


def _lowpass(x: np.ndarray, cutoff: float) -> np.ndarray:
    """Single-pole recursive smoothing; cutoff is a fraction of the rate."""
    a = math.exp(-2.0 * math.pi * cutoff)
    y = np.empty_like(x)
    prev = np.zeros(x.shape[1])
    for t in range(x.shape[0]):
        prev = a * prev + (1.0 - a) * x[t]
        y[t] = prev
    return y


def gen_synth(spec: SynthSpec):
    """Returns ``(spike_stream, ground_truth_trajectory)``.

    The trajectory holds the latent velocity (unit variance per axis,
    sample t at t*bin_ms); channel rates are
    ``rate_scale * max(0, m_c . v(t) + baseline_c)`` and counts are
    Poisson draws clipped to one byte.
    """
    rng = np.random.default_rng(spec.seed)
    t = spec.duration_steps

    noise = rng.standard_normal((t, 2))
    velocity = _lowpass(noise, spec.smoothness)
    std = velocity.std(axis=0)
    std[std == 0] = 1.0
    velocity = velocity / std

    mixing = rng.normal(scale=0.5, size=(spec.channels, 2))
    baseline = rng.uniform(0.05, 0.4, size=spec.channels)
    rates = spec.rate_scale * np.maximum(velocity @ mixing.T + baseline, 0.0)
    counts = np.minimum(rng.poisson(rates), MAX_COUNT).astype(np.int64)

    stream = SpikeStream(channels=spec.channels, bin_ms=spec.bin_ms, counts=counts.T)
    truth = Trajectory(start_ms=0.0, step_ms=spec.bin_ms, samples=velocity)
    return stream, truth
