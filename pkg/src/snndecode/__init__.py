"""Streaming inference and analysis toolkit for hybrid spiking decoders.

A conv/pool front-end compresses binned cortical spike counts in time, a
recurrent leaky integrate-and-fire core turns each compressed column into
a 2-D velocity keypoint, and linear interpolation restores the input
rate.  The package provides:

* :mod:`snndecode.bufcalc` -- the buffer-size calculus that sizes the
  streaming runtime and decides realtime capability;
* :mod:`snndecode.model` -- network configs and whole-sequence inference;
* :mod:`snndecode.stream` -- the ring-buffered incremental runtime,
  bit-equivalent to offline inference;
* :mod:`snndecode.fxp` -- fixed-point formats and saturating arithmetic;
* :mod:`snndecode.metrics` -- accuracy, footprint, MAC/AC and sparsity;
* :mod:`snndecode.synth`, :mod:`snndecode.formats`,
  :mod:`snndecode.config`, :mod:`snndecode.cli` -- data generation, file
  formats and the command-line interface.
"""

from .bufcalc import (
    BufferPlan,
    StackSpec,
    compute_plan,
    execution_rate,
    latency,
    latency_vs_kernel_sweep,
    realtime_check,
)
from .fxp import FixedPointFormat, FxpValue, Q1_4, Q1_7, dequantize, quantize
from .metrics import count_ops, footprint, r2_score, resource_report, sparsity
from .model import (
    ConvLayerSpec,
    LifParams,
    NetworkConfig,
    NetworkModel,
    PoolLayerSpec,
    SpikeStream,
    Trajectory,
    init_model,
    interpolate_linear,
    offline_forward,
    quantize_model,
)
from .stream import equivalence_report, push_bin, run_stream, stream_init
from .synth import SynthSpec, gen_synth

__version__ = "0.1.0"

__all__ = [
    "BufferPlan",
    "StackSpec",
    "compute_plan",
    "execution_rate",
    "latency",
    "latency_vs_kernel_sweep",
    "realtime_check",
    "FixedPointFormat",
    "FxpValue",
    "Q1_4",
    "Q1_7",
    "dequantize",
    "quantize",
    "count_ops",
    "footprint",
    "r2_score",
    "resource_report",
    "sparsity",
    "ConvLayerSpec",
    "LifParams",
    "NetworkConfig",
    "NetworkModel",
    "PoolLayerSpec",
    "SpikeStream",
    "Trajectory",
    "init_model",
    "interpolate_linear",
    "offline_forward",
    "quantize_model",
    "equivalence_report",
    "push_bin",
    "run_stream",
    "stream_init",
    "SynthSpec",
    "gen_synth",
    "__version__",
]
