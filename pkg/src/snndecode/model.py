"""Hybrid spiking decoder: temporal conv/pool front-end, recurrent LIF
core, leaky-integrator readout, and keypoint interpolation.

The network compresses a multichannel spike-count sequence in time
(kernel sizes double from one conv layer to the next, each followed by
non-overlapping average pooling), runs one recurrent leaky
integrate-and-fire step per compressed column ("keypoint"), reads out a
2-D velocity per keypoint, and linearly interpolates the keypoints back
to the input rate.

Inference runs in one of two arithmetic modes decided by the config:

* float: float64 throughout;
* quantized: weights are fixed-point mantissas (Q1.7 by default) and all
  layer-boundary activations ("buffers") are re-quantized to the buffer
  format (Q1.4 by default).  Accumulation is exact integer arithmetic
  with a single rounding per boundary, which makes inference bit-exactly
  reproducible.

Both the offline (whole-sequence) path here and the incremental path in
:mod:`snndecode.stream` funnel every column through the same kernels in
:class:`Engine`, so the two paths agree bit-for-bit in quantized mode and
to the last float rounding otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .bufcalc import StackSpec, compute_plan
from .fxp import (
    FixedPointFormat,
    SaturationCounter,
    dequantize_array,
    quantize_array,
    requantize_raw,
)

__all__ = [
    "ConvLayerSpec",
    "PoolLayerSpec",
    "LifParams",
    "NetworkConfig",
    "Param",
    "NetworkModel",
    "SpikeStream",
    "Trajectory",
    "LifState",
    "ForwardRecord",
    "conv1d_forward",
    "pool_forward",
    "lif_step",
    "readout_step",
    "interpolate_linear",
    "offline_forward",
    "init_model",
    "quantize_model",
]


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ConvLayerSpec:
    out_channels: int
    kernel: int
    stride: int = 1


@dataclass(frozen=True)
class PoolLayerSpec:
    kernel: int
    stride: int


@dataclass(frozen=True)
class LifParams:
    """Discrete-time LIF: v' = beta*v + current, spike at v' >= threshold."""

    beta: float = 0.9
    threshold: float = 1.0
    reset: str = "subtract"  # or "zero"

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must lie in [0, 1)")
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if self.reset not in ("subtract", "zero"):
            raise ValueError("reset must be 'subtract' or 'zero'")


MAX_INTERPOLATION_FACTOR = 8


@dataclass(frozen=True)
class NetworkConfig:
    """Static description of one decoder network.

    Restrictions beyond basic shape checks keep the network inside the
    family the streaming buffer calculus is exact for: conv strides are 1
    (all temporal downsampling happens in pooling), pooling is
    non-overlapping (kernel == stride), kernel sizes double per conv
    layer, and the total compression factor stays <= 8.
    """

    input_channels: int
    conv_layers: tuple
    pool_layers: tuple
    lif_layers: tuple  # units per LIF layer
    lif_params: LifParams = LifParams()
    readout_units: int = 2
    readout_beta: float = 0.9
    readout_mode: str = "integrator"  # or "membrane"
    conv_activation: str = "none"  # or "relu"
    step_ms: float = 4.0
    seq_len_train: int | None = None  # training metadata only
    weight_format: FixedPointFormat | None = None
    buffer_format: FixedPointFormat | None = None

    def __post_init__(self):
        object.__setattr__(self, "conv_layers", tuple(self.conv_layers))
        object.__setattr__(self, "pool_layers", tuple(self.pool_layers))
        object.__setattr__(self, "lif_layers", tuple(int(u) for u in self.lif_layers))
        if self.input_channels < 1:
            raise ValueError("input_channels must be >= 1")
        if not self.conv_layers:
            raise ValueError("need at least one conv layer")
        if len(self.pool_layers) != len(self.conv_layers):
            raise ValueError("layers alternate conv/pool: need one pool per conv layer")
        for i, conv in enumerate(self.conv_layers):
            if conv.kernel < 1 or conv.out_channels < 1:
                raise ValueError(f"conv layer {i}: kernel and out_channels must be >= 1")
            if conv.stride != 1:
                raise ValueError(
                    f"conv layer {i}: stride must be 1 (downsampling belongs to pooling)"
                )
            if i > 0 and conv.kernel != 2 * self.conv_layers[i - 1].kernel:
                raise ValueError(
                    f"conv kernel sizes must double per layer, got "
                    f"{self.conv_layers[i - 1].kernel} then {conv.kernel}"
                )
        for i, pool in enumerate(self.pool_layers):
            if pool.kernel < 1:
                raise ValueError(f"pool layer {i}: kernel must be >= 1")
            if pool.kernel != pool.stride:
                raise ValueError(
                    f"pool layer {i}: kernel must equal stride (non-overlapping pooling)"
                )
        if self.interpolation_factor > MAX_INTERPOLATION_FACTOR:
            raise ValueError(
                f"total stride product {self.interpolation_factor} exceeds the "
                f"supported maximum {MAX_INTERPOLATION_FACTOR}"
            )
        if not self.lif_layers or any(u < 1 for u in self.lif_layers):
            raise ValueError("need at least one LIF layer with >= 1 units")
        if self.readout_units != 2:
            raise ValueError("readout_units must be 2 (planar velocities)")
        if not 0.0 <= self.readout_beta <= 1.0:
            raise ValueError("readout_beta must lie in [0, 1]")
        if self.readout_mode not in ("integrator", "membrane"):
            raise ValueError("readout_mode must be 'integrator' or 'membrane'")
        if self.conv_activation not in ("none", "relu"):
            raise ValueError("conv_activation must be 'none' or 'relu'")
        if self.step_ms <= 0:
            raise ValueError("step_ms must be positive")
        if self.buffer_format is not None and self.weight_format is None:
            raise ValueError("buffer quantization requires a weight format")

    @property
    def interpolation_factor(self) -> int:
        r = 1
        for conv, pool in zip(self.conv_layers, self.pool_layers):
            r *= conv.stride * pool.stride
        return r

    @property
    def quantized(self) -> bool:
        return self.buffer_format is not None

    def stack_spec(self) -> StackSpec:
        return StackSpec(
            conv_kernels=[c.kernel for c in self.conv_layers],
            conv_strides=[c.stride for c in self.conv_layers],
            pool_kernels=[p.kernel for p in self.pool_layers],
            pool_strides=[p.stride for p in self.pool_layers],
            step_ms=self.step_ms,
        )

    def channel_counts(self):
        """Input channel count of each front-end layer (conv, pool, ...)."""
        counts = []
        c = self.input_channels
        for conv in self.conv_layers:
            counts.append(c)  # conv input
            c = conv.out_channels
            counts.append(c)  # pool input
        return counts

    def param_shapes(self):
        """Parameter name -> shape, in file order."""
        shapes = {}
        c_in = self.input_channels
        for i, conv in enumerate(self.conv_layers):
            shapes[f"conv{i}.weight"] = (conv.out_channels, c_in, conv.kernel)
            shapes[f"conv{i}.bias"] = (conv.out_channels,)
            c_in = conv.out_channels
        fan_in = c_in
        for i, units in enumerate(self.lif_layers):
            shapes[f"lif{i}.input"] = (units, fan_in)
            shapes[f"lif{i}.recurrent"] = (units, units)
            shapes[f"lif{i}.bias"] = (units,)
            fan_in = units
        shapes["readout.weight"] = (self.readout_units, fan_in)
        return shapes


# ---------------------------------------------------------------------------
# parameters and model


@dataclass(frozen=True)
class Param:
    """One tensor, either float64 values or fixed-point raw mantissas."""

    data: np.ndarray
    fmt: FixedPointFormat | None = None

    def __post_init__(self):
        if self.fmt is None:
            object.__setattr__(self, "data", np.asarray(self.data, dtype=np.float64))
        else:
            raw = np.asarray(self.data, dtype=np.int64)
            if raw.size and (raw.max() > self.fmt.raw_max or raw.min() < self.fmt.raw_min):
                raise ValueError(f"raw mantissas outside {self.fmt} range")
            object.__setattr__(self, "data", raw)

    @property
    def values(self) -> np.ndarray:
        """Real values regardless of storage."""
        if self.fmt is None:
            return self.data
        return dequantize_array(self.data, self.fmt)

    @property
    def stored_bits(self) -> int:
        return 32 if self.fmt is None else self.fmt.total_bits


@dataclass(frozen=True)
class NetworkModel:
    config: NetworkConfig
    parameters: dict

    def __post_init__(self):
        shapes = self.config.param_shapes()
        missing = set(shapes) - set(self.parameters)
        extra = set(self.parameters) - set(shapes)
        if missing or extra:
            raise ValueError(f"parameter mismatch: missing {sorted(missing)}, extra {sorted(extra)}")
        for name, shape in shapes.items():
            p = self.parameters[name]
            if p.data.shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {p.data.shape}")
            if self.config.weight_format is not None and p.fmt != self.config.weight_format:
                raise ValueError(f"{name}: expected {self.config.weight_format} storage")
            if self.config.weight_format is None and p.fmt is not None:
                raise ValueError(f"{name}: float config cannot hold quantized parameters")

    def param(self, name: str) -> Param:
        return self.parameters[name]

    def values(self, name: str) -> np.ndarray:
        return self.parameters[name].values


def init_model(config: NetworkConfig, rng: np.random.Generator,
               weight_scale: float = 0.3) -> NetworkModel:
    """Random model: uniform weights in [-weight_scale, weight_scale].

    With a quantized config the drawn values are quantized to the weight
    format immediately, so the stored model contains only representable
    values.
    """
    params = {}
    for name, shape in config.param_shapes().items():
        values = rng.uniform(-weight_scale, weight_scale, size=shape)
        if name.endswith(".bias"):
            values *= 0.5
        if config.weight_format is not None:
            params[name] = Param(quantize_array(values, config.weight_format),
                                 config.weight_format)
        else:
            params[name] = Param(values)
    return NetworkModel(config, params)


def quantize_model(model: NetworkModel,
                   weight_format: FixedPointFormat,
                   buffer_format: FixedPointFormat | None = None) -> NetworkModel:
    """Re-store a float model's parameters as fixed-point mantissas."""
    cfg = replace(model.config, weight_format=weight_format, buffer_format=buffer_format)
    params = {
        name: Param(quantize_array(p.values, weight_format), weight_format)
        for name, p in model.parameters.items()
    }
    return NetworkModel(cfg, params)


# ---------------------------------------------------------------------------
# data containers


@dataclass(frozen=True)
class SpikeStream:
    """Binned multichannel spike counts, channels x time."""

    channels: int
    bin_ms: float
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2 or counts.shape[0] != self.channels:
            raise ValueError(f"counts must be {self.channels} x T")
        if not np.issubdtype(counts.dtype, np.integer):
            raise ValueError("spike counts must be integers")
        if counts.size and counts.min() < 0:
            raise ValueError("spike counts must be non-negative")
        if self.bin_ms <= 0:
            raise ValueError("bin_ms must be positive")
        object.__setattr__(self, "counts", counts)

    @property
    def num_bins(self) -> int:
        return self.counts.shape[1]


@dataclass(frozen=True)
class Trajectory:
    """2-D velocity series at a fixed step; start_ms anchors sample 0."""

    start_ms: float
    step_ms: float
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[1] != 2:
            raise ValueError("samples must be T x 2")
        if self.step_ms <= 0:
            raise ValueError("step_ms must be positive")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.shape[0]

    def times_ms(self) -> np.ndarray:
        return self.start_ms + self.step_ms * np.arange(len(self))


@dataclass
class LifState:
    """Mutable per-layer integrate-and-fire state."""

    membrane: np.ndarray
    last_spikes: np.ndarray

    @classmethod
    def zeros(cls, units: int, quantized: bool) -> "LifState":
        dtype = np.int64 if quantized else np.float64
        return cls(np.zeros(units, dtype=dtype), np.zeros(units, dtype=np.int64))

    def copy(self) -> "LifState":
        return LifState(self.membrane.copy(), self.last_spikes.copy())


# ---------------------------------------------------------------------------
# public single-layer operations (float domain)


def conv1d_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray | None = None,
                   stride: int = 1, mode: str = "valid") -> np.ndarray:
    """Temporal cross-correlation of a C_in x T array.

    valid: T' = floor((T - kernel)/stride) + 1, no padding.
    same: zero-pad so that T' = ceil(T/stride); this mirrors the
    centered-kernel layout used during training (pad split evenly, the
    extra column on the right for even kernels).
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim == 1:
        weights = weights[None, None, :]
    c_out, c_in, kernel = weights.shape
    if x.shape[0] != c_in:
        raise ValueError(f"expected {c_in} input channels, got {x.shape[0]}")
    if bias is None:
        bias = np.zeros(c_out)
    bias = np.asarray(bias, dtype=np.float64)
    t = x.shape[1]
    if mode == "same":
        t_out = -(-t // stride)
        pad_total = max((t_out - 1) * stride + kernel - t, 0)
        left = pad_total // 2
        x = np.pad(x, ((0, 0), (left, pad_total - left)))
    elif mode == "valid":
        if t < kernel:
            raise ValueError(f"input length {t} shorter than kernel {kernel}")
        t_out = (t - kernel) // stride + 1
    else:
        raise ValueError("mode must be 'valid' or 'same'")
    out = np.empty((c_out, t_out))
    for j in range(t_out):
        start = j * stride
        out[:, j] = np.tensordot(weights, x[:, start:start + kernel], axes=([1, 2], [0, 1])) + bias
    return out


def pool_forward(x: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    """Average pooling along time; T' = floor((T - kernel)/stride) + 1."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    t = x.shape[1]
    if t < kernel:
        raise ValueError(f"input length {t} shorter than pool kernel {kernel}")
    t_out = (t - kernel) // stride + 1
    out = np.empty((x.shape[0], t_out))
    for j in range(t_out):
        out[:, j] = x[:, j * stride: j * stride + kernel].mean(axis=1)
    return out


def lif_step(state: LifState, x: np.ndarray, params: LifParams,
             w_in: np.ndarray | None = None, w_rec: np.ndarray | None = None,
             bias: np.ndarray | None = None):
    """One float-mode LIF update.

    ``x`` is either a raw feature vector (projected through ``w_in``) or,
    when ``w_in`` is None, an already-summed input current.  Recurrence
    uses the previous step's spikes.  Returns ``(new_state, spikes)``.
    """
    current = np.asarray(x, dtype=np.float64)
    if w_in is not None:
        current = w_in @ current
    if w_rec is not None:
        current = current + w_rec @ state.last_spikes.astype(np.float64)
    if bias is not None:
        current = current + bias
    v = params.beta * state.membrane + current
    spikes = v >= params.threshold
    if params.reset == "subtract":
        v = v - params.threshold * spikes
    else:
        v = np.where(spikes, 0.0, v)
    return LifState(v, spikes.astype(np.int64)), spikes.astype(np.int64)


def readout_step(u: np.ndarray, spikes_in: np.ndarray, weights: np.ndarray,
                 beta_out: float) -> np.ndarray:
    """Leaky integration without threshold: u' = beta_out*u + W @ s."""
    return beta_out * np.asarray(u, dtype=np.float64) + weights @ np.asarray(
        spikes_in, dtype=np.float64
    )


def interp_segment(prev: np.ndarray, cur: np.ndarray, r_int: int) -> np.ndarray:
    """The r_int output samples between two keypoints (endpoint included).

    Shared verbatim by the offline interpolator and the streaming emitter
    so both produce bit-identical floats.
    """
    prev = np.asarray(prev, dtype=np.float64)
    cur = np.asarray(cur, dtype=np.float64)
    if r_int == 1:
        return cur[None, :].copy()
    frac = np.arange(1, r_int)[:, None] / r_int
    body = prev[None, :] + (cur - prev)[None, :] * frac
    return np.vstack([body, cur[None, :]])


def interpolate_linear(keypoints: np.ndarray, r_int: int) -> np.ndarray:
    """Expand K keypoints to K*r_int samples.

    Keypoint i anchors output index (i+1)*r_int - 1; indices between two
    anchors interpolate linearly and indices before the first anchor hold
    its value.
    """
    keypoints = np.atleast_2d(np.asarray(keypoints, dtype=np.float64))
    if keypoints.shape[0] < 1:
        raise ValueError("need at least one keypoint")
    if r_int < 1:
        raise ValueError("interpolation factor must be >= 1")
    k = keypoints.shape[0]
    out = np.empty((k * r_int, keypoints.shape[1]))
    out[:r_int] = keypoints[0]
    for j in range(1, k):
        out[j * r_int:(j + 1) * r_int] = interp_segment(keypoints[j - 1], keypoints[j], r_int)
    return out


# ---------------------------------------------------------------------------
# the engine: column kernels shared by offline and streaming paths


class Engine:
    """Arithmetic kernels for one model, resolved once.

    Activations travel as float64 arrays in float mode and as int64
    buffer-format mantissas in quantized mode.  The offline and streaming
    paths both call these kernels column by column, which pins the
    summation order and makes the two paths agree exactly.
    """

    def __init__(self, model: NetworkModel, counter: SaturationCounter | None = None):
        self.model = model
        cfg = model.config
        self.quantized = cfg.quantized
        self.counter = counter
        self.plan = compute_plan(cfg.stack_spec())
        self.r_int = self.plan.interpolation_factor
        self.mul_count = 0  # conv multiplies, for incrementality checks

        if self.quantized:
            self.wfmt = cfg.weight_format
            self.bfmt = cfg.buffer_format
            self.wshift = self.wfmt.fraction_bits
            q = lambda x: quantize_array(np.asarray([x]), self.wfmt)[0]
            self.beta_raw = int(q(cfg.lif_params.beta))
            self.readout_beta_raw = int(q(cfg.readout_beta))
            self.threshold_raw = int(
                quantize_array(np.asarray([cfg.lif_params.threshold]), self.bfmt)[0]
            )

        self.front = []
        for i, (conv, pool) in enumerate(zip(cfg.conv_layers, cfg.pool_layers)):
            self.front.append(("conv", model.param(f"conv{i}.weight"),
                               model.param(f"conv{i}.bias"), conv))
            self.front.append(("pool", pool))
        # flattened conv weights: one fixed GEMV shape per layer, so the
        # offline and streaming paths sum in the same order bit for bit
        self.conv_w2d = {
            i: np.ascontiguousarray(entry[1].data.reshape(entry[1].data.shape[0], -1))
            for i, entry in enumerate(self.front) if entry[0] == "conv"
        }
        self.lif_weights = [
            (model.param(f"lif{i}.input"), model.param(f"lif{i}.recurrent"),
             model.param(f"lif{i}.bias"))
            for i in range(len(cfg.lif_layers))
        ]
        self.readout_w = model.param("readout.weight")

    # -- boundary conversion

    def ingest(self, counts: np.ndarray) -> np.ndarray:
        """Spike-count columns -> buffer domain (float64 or raw mantissas)."""
        if self.quantized:
            return quantize_array(counts.astype(np.float64), self.bfmt, self.counter)
        return counts.astype(np.float64)

    def to_float(self, buf: np.ndarray) -> np.ndarray:
        if self.quantized:
            return dequantize_array(buf, self.bfmt)
        return buf

    # -- front-end kernels

    def conv_columns(self, layer_index: int, window: np.ndarray) -> np.ndarray:
        """All valid conv outputs of a window: C_in x (n+k-1) -> C_out x n."""
        kind, w, b, conv = self.front[layer_index]
        assert kind == "conv"
        kernel = conv.kernel
        n = window.shape[1] - kernel + 1
        if n < 1:
            raise ValueError(f"window length {window.shape[1]} shorter than kernel {kernel}")
        self.mul_count += n * w.data.size
        w2d = self.conv_w2d[layer_index]
        relu = self.model.config.conv_activation == "relu"
        if self.quantized:
            out = np.empty((w.data.shape[0], n), dtype=np.int64)
            bias_term = b.data << self.bfmt.fraction_bits
            for j in range(n):
                win = np.ascontiguousarray(window[:, j:j + kernel]).ravel()
                out[:, j] = requantize_raw(w2d @ win + bias_term, self.wshift, self.bfmt,
                                           self.counter)
            if relu:
                np.maximum(out, 0, out=out)
            return out
        out = np.empty((w.data.shape[0], n))
        for j in range(n):
            win = np.ascontiguousarray(window[:, j:j + kernel]).ravel()
            out[:, j] = w2d @ win + b.data
        if relu:
            np.maximum(out, 0.0, out=out)
        return out

    def pool_columns(self, layer_index: int, window: np.ndarray) -> np.ndarray:
        """Non-overlapping mean over blocks of ``kernel`` columns."""
        kind, pool = self.front[layer_index]
        assert kind == "pool"
        k = pool.kernel
        if window.shape[1] % k != 0:
            raise ValueError("pool window must be a whole number of blocks")
        n = window.shape[1] // k
        if self.quantized:
            if k == 1:
                return np.ascontiguousarray(window)
            sums = np.ascontiguousarray(window).reshape(window.shape[0], n, k).sum(axis=2)
            mag = (2 * np.abs(sums) + k) // (2 * k)  # round half away from zero
            raw = np.where(sums >= 0, mag, -mag)
            return np.clip(raw, self.bfmt.raw_min, self.bfmt.raw_max)
        out = np.empty((window.shape[0], n))
        for j in range(n):
            out[:, j] = np.ascontiguousarray(window[:, j * k:(j + 1) * k]).mean(axis=1)
        return out

    # -- core kernels (one keypoint column at a time)

    def new_core_state(self):
        states = [LifState.zeros(u, self.quantized) for u in self.model.config.lif_layers]
        u0 = np.zeros(2, dtype=np.int64 if self.quantized else np.float64)
        return states, u0

    def core_step(self, states, u, column):
        """LIF stack plus readout for one compressed column.

        Returns ``(states, u, keypoint)`` where keypoint is the float 2-D
        velocity.  States are updated in place.
        """
        cfg = self.model.config
        x = np.ascontiguousarray(column)
        last_membrane = None
        for li, (state, (w_in, w_rec, bias)) in enumerate(zip(states, self.lif_weights)):
            if self.quantized:
                # layer 0 sees buffer-scale features; deeper layers see
                # binary spikes, whose products need the buffer shift
                in_term = w_in.data @ x
                if li > 0:
                    in_term = in_term << self.bfmt.fraction_bits
                numer = (
                    self.beta_raw * state.membrane
                    + in_term
                    + ((w_rec.data @ state.last_spikes) << self.bfmt.fraction_bits)
                    + (bias.data << self.bfmt.fraction_bits)
                )
                v = requantize_raw(numer, self.wshift, self.bfmt, self.counter)
                spikes = (v >= self.threshold_raw).astype(np.int64)
                if cfg.lif_params.reset == "subtract":
                    v = v - self.threshold_raw * spikes
                else:
                    v = np.where(spikes.astype(bool), np.int64(0), v)
            else:
                current = w_in.data @ x + w_rec.data @ state.last_spikes.astype(np.float64) \
                    + bias.data
                v = cfg.lif_params.beta * state.membrane + current
                spikes = (v >= cfg.lif_params.threshold).astype(np.int64)
                if cfg.lif_params.reset == "subtract":
                    v = v - cfg.lif_params.threshold * spikes
                else:
                    v = np.where(spikes.astype(bool), 0.0, v)
            state.membrane = v
            state.last_spikes = spikes
            last_membrane = v
            x = spikes if self.quantized else spikes.astype(np.float64)

        ro_in_is_membrane = cfg.readout_mode == "membrane"
        if self.quantized:
            if ro_in_is_membrane:
                contrib = self.readout_w.data @ last_membrane
            else:
                contrib = (self.readout_w.data @ states[-1].last_spikes) << self.bfmt.fraction_bits
            numer = self.readout_beta_raw * u + contrib
            u = requantize_raw(numer, self.wshift, self.bfmt, self.counter)
            keypoint = dequantize_array(u, self.bfmt)
        else:
            src = last_membrane if ro_in_is_membrane else states[-1].last_spikes.astype(np.float64)
            u = cfg.readout_beta * u + self.readout_w.data @ src
            keypoint = u.copy()
        return states, u, keypoint


def check_bin_width(config: NetworkConfig, spikes: SpikeStream):
    """Reject streams binned at a different width than the model expects."""
    if abs(spikes.bin_ms - config.step_ms) > 1e-4 * config.step_ms:
        raise ValueError(
            f"stream is binned at {spikes.bin_ms:g} ms but the model expects "
            f"{config.step_ms:g} ms bins"
        )


@dataclass
class ForwardRecord:
    """Traces captured during offline inference, for metrics."""

    layer_inputs: list = field(default_factory=list)  # per front-end layer, C x T
    keypoint_features: np.ndarray | None = None  # features entering the LIF core
    lif_spikes: list = field(default_factory=list)  # per layer, K x units
    lif_membrane_prev: list = field(default_factory=list)  # per layer, K x units
    keypoints: np.ndarray | None = None

    @property
    def total_spikes(self) -> int:
        return int(sum(s.sum() for s in self.lif_spikes))

    @property
    def spike_opportunities(self) -> int:
        return int(sum(s.size for s in self.lif_spikes))


def offline_forward(model: NetworkModel, spikes: SpikeStream, record: bool = False):
    """Whole-sequence inference.

    Returns ``(keypoints, trajectory)`` or ``(keypoints, trajectory,
    record)`` with ``record=True``.  The trajectory has ``K * r_int``
    samples, ``start_ms = 0`` (sample t is aligned with input bin t, the
    centered-kernel training convention), and ``step_ms`` from the config.
    """
    cfg = model.config
    if spikes.channels != cfg.input_channels:
        raise ValueError(
            f"model expects {cfg.input_channels} channels, stream has {spikes.channels}"
        )
    check_bin_width(cfg, spikes)
    engine = Engine(model)
    r = engine.plan.receptive_field
    if spikes.num_bins < r:
        raise ValueError(
            f"sequence of {spikes.num_bins} bins is shorter than the receptive field {r}"
        )
    rec = ForwardRecord() if record else None

    x = engine.ingest(spikes.counts)
    for li in range(len(engine.front)):
        if rec is not None:
            rec.layer_inputs.append(engine.to_float(x))
        kind = engine.front[li][0]
        if kind == "conv":
            x = engine.conv_columns(li, x)
        else:
            k = engine.front[li][1].kernel
            usable = (x.shape[1] // k) * k
            x = engine.pool_columns(li, x[:, :usable])

    n_key = x.shape[1]
    if rec is not None:
        rec.keypoint_features = engine.to_float(x)
        for units in cfg.lif_layers:
            rec.lif_spikes.append(np.zeros((n_key, units), dtype=np.int64))
            rec.lif_membrane_prev.append(np.zeros((n_key, units)))

    states, u = engine.new_core_state()
    keypoints = np.empty((n_key, 2))
    for j in range(n_key):
        if rec is not None:
            for li, st in enumerate(states):
                rec.lif_membrane_prev[li][j] = engine.to_float(st.membrane)
        states, u, keypoints[j] = engine.core_step(states, u, x[:, j])
        if rec is not None:
            for li, st in enumerate(states):
                rec.lif_spikes[li][j] = st.last_spikes

    trajectory = Trajectory(
        start_ms=0.0,
        step_ms=cfg.step_ms,
        samples=interpolate_linear(keypoints, engine.r_int),
    )
    if rec is not None:
        rec.keypoints = keypoints
        return keypoints, trajectory, rec
    return keypoints, trajectory
