"""Ready-made network layouts.

``realtime_*``: two conv layers (kernels 9 and 18, pool 2/2), receptive
field 46 bins, 96 ms latency at 4 ms bins, 62.5 Hz keypoint rate --
inside the 100 ms / 10 Hz realtime envelope.

``benchmark_*``: three conv layers (kernels 31/62/124), receptive field
652 bins -- higher accuracy headroom but 1308 ms latency, far outside
the envelope.

Conv channel counts follow the large published layouts (40 channels for
the realtime network); LIF depth and width are illustrative defaults,
freely overridable.
"""

from __future__ import annotations

from .fxp import Q1_4, Q1_7
from .model import ConvLayerSpec, LifParams, NetworkConfig, PoolLayerSpec

__all__ = ["realtime_config", "realtime_quantized_config", "benchmark_config"]


def realtime_config(input_channels: int = 96, conv_channels: int = 40,
                    lif_units: tuple = (64, 64)) -> NetworkConfig:
    return NetworkConfig(
        input_channels=input_channels,
        conv_layers=(
            ConvLayerSpec(conv_channels, 9),
            ConvLayerSpec(conv_channels, 18),
        ),
        pool_layers=(PoolLayerSpec(2, 2), PoolLayerSpec(2, 2)),
        lif_layers=tuple(lif_units),
        lif_params=LifParams(beta=0.9, threshold=1.0, reset="subtract"),
        readout_beta=0.9,
        step_ms=4.0,
    )


def realtime_quantized_config(input_channels: int = 96, conv_channels: int = 40,
                              lif_units: tuple = (64, 64)) -> NetworkConfig:
    """The realtime layout with Q1.7 weights and Q1.4 streaming buffers."""
    base = realtime_config(input_channels, conv_channels, lif_units)
    from dataclasses import replace

    return replace(base, weight_format=Q1_7, buffer_format=Q1_4)


def benchmark_config(input_channels: int = 96, conv_channels: int = 64,
                     lif_units: tuple = (128, 128)) -> NetworkConfig:
    return NetworkConfig(
        input_channels=input_channels,
        conv_layers=(
            ConvLayerSpec(conv_channels, 31),
            ConvLayerSpec(conv_channels, 62),
            ConvLayerSpec(conv_channels, 124),
        ),
        pool_layers=(PoolLayerSpec(2, 2),) * 3,
        lif_layers=tuple(lif_units),
        lif_params=LifParams(beta=0.9, threshold=1.0, reset="subtract"),
        readout_beta=0.9,
        step_ms=4.0,
    )
