"""Accuracy and resource metrics for decoder models.

Operation counting follows an event-driven convention, documented here
because hardware-accounting rules vary:

* conv layers: one MAC per output column per nonzero weight (the input
  features are real-valued, so zeros in the data are not skipped);
* pooling: per output element whose window holds any nonzero value,
  ``kernel - 1`` ACs for the additions and one MAC for the division
  (none when the kernel is 1);
* first LIF layer input: one MAC per step per nonzero input weight
  (real-valued features); deeper LIF layers receive binary spikes, so
  their fan-in counts as ACs, one per spike per nonzero weight column;
* LIF recurrence: one AC per previous-step spike per nonzero recurrent
  weight in that unit's column;
* LIF leak: one MAC per unit per step when the decay factor and the
  stored membrane are both nonzero;
* readout: counted as MACs; in integrator mode only columns of spiking
  units contribute, in membrane mode every nonzero weight does; the
  readout leak adds one MAC per dimension per step while the integrator
  state is nonzero.

Bias additions are excluded everywhere (constant per output, negligible
and convention-dependent).

MACs and ACs are reported separately and never folded into one energy
number: their relative cost varies by orders of magnitude across target
platforms (a multiplier-rich DSP vs an event-driven accumulator array),
so any weighting belongs to the deployment study, not to this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bufcalc import compute_plan
from .model import ForwardRecord, NetworkModel, SpikeStream, Trajectory, offline_forward

__all__ = [
    "OpCounts",
    "FootprintReport",
    "ResourceReport",
    "r2_score",
    "align_trajectories",
    "count_ops",
    "footprint",
    "sparsity",
    "weight_reg_term",
    "spike_reg_term",
    "resource_report",
    "score_summary",
    "DEFAULT_WEIGHT_REG",
    "DEFAULT_SPIKE_REG",
]

# regularizer scales used when compressing the decoder
DEFAULT_WEIGHT_REG = 1.71e-6
DEFAULT_SPIKE_REG = 2.87e-3


# ---------------------------------------------------------------------------
# accuracy


def r2_score(pred: Trajectory, target: Trajectory) -> float:
    """Coefficient of determination, averaged over the two velocity axes.

    Both trajectories must cover the same instants (same start, step and
    length); a constant target axis has no variance to explain and is an
    error.
    """
    if len(pred) != len(target):
        raise ValueError(f"length mismatch: {len(pred)} vs {len(target)}")
    if pred.step_ms != target.step_ms or pred.start_ms != target.start_ms:
        raise ValueError("trajectories are not aligned in time")
    if len(target) == 0:
        raise ValueError("empty trajectories")
    p, t = pred.samples, target.samples
    sse = ((p - t) ** 2).sum(axis=0)
    sst = ((t - t.mean(axis=0)) ** 2).sum(axis=0)
    if np.any(sst == 0):
        raise ValueError("target has a zero-variance dimension")
    return float(np.mean(1.0 - sse / sst))


def align_trajectories(pred: Trajectory, target: Trajectory):
    """Crop both trajectories to their common time window.

    Requires equal steps and an integer bin offset between the starts;
    returns two equal-length, identically-stamped trajectories.
    """
    if pred.step_ms != target.step_ms:
        raise ValueError("step mismatch")
    offset = (target.start_ms - pred.start_ms) / pred.step_ms
    if abs(offset - round(offset)) > 1e-9:
        raise ValueError("starts are not a whole number of steps apart")
    offset = int(round(offset))
    p_lo, t_lo = max(0, offset), max(0, -offset)
    n = min(len(pred) - p_lo, len(target) - t_lo)
    if n <= 0:
        raise ValueError("no overlap between trajectories")
    start = target.start_ms + t_lo * target.step_ms
    return (
        Trajectory(start, pred.step_ms, pred.samples[p_lo:p_lo + n]),
        Trajectory(start, target.step_ms, target.samples[t_lo:t_lo + n]),
    )


def score_summary(scores):
    """Mean and standard deviation of the mean, for per-file score lists."""
    scores = np.asarray(list(scores), dtype=np.float64)
    if scores.size == 0:
        raise ValueError("no scores")
    sdm = float(scores.std(ddof=1) / math.sqrt(scores.size)) if scores.size > 1 else 0.0
    return float(scores.mean()), sdm


# ---------------------------------------------------------------------------
# operation counting


@dataclass(frozen=True)
class OpCounts:
    macs: int
    acs: int
    num_bins: int
    num_keypoints: int

    @property
    def macs_per_step(self) -> float:
        return self.macs / self.num_bins if self.num_bins else 0.0

    @property
    def acs_per_step(self) -> float:
        return self.acs / self.num_bins if self.num_bins else 0.0

    @property
    def macs_per_keypoint(self) -> float:
        return self.macs / self.num_keypoints if self.num_keypoints else 0.0

    @property
    def acs_per_keypoint(self) -> float:
        return self.acs / self.num_keypoints if self.num_keypoints else 0.0


def _nnz(a) -> int:
    return int(np.count_nonzero(a))


def count_ops(model: NetworkModel, spikes: SpikeStream,
              record: ForwardRecord | None = None) -> OpCounts:
    """Effective MAC/AC counts of one offline run (convention above)."""
    cfg = model.config
    if record is None:
        _, _, record = offline_forward(model, spikes, record=True)
    macs = 0
    acs = 0

    for li, x_in in enumerate(record.layer_inputs):
        if li % 2 == 0:  # conv layer
            conv = cfg.conv_layers[li // 2]
            out_cols = x_in.shape[1] - conv.kernel + 1
            macs += out_cols * _nnz(model.values(f"conv{li // 2}.weight"))
        else:  # pool layer
            k = cfg.pool_layers[li // 2].kernel
            if k == 1:
                continue
            n_blocks = x_in.shape[1] // k
            blocks = x_in[:, : n_blocks * k].reshape(x_in.shape[0], n_blocks, k)
            active = np.any(blocks != 0, axis=2)  # per channel per block
            n_active = int(active.sum())
            acs += n_active * (k - 1)
            macs += n_active

    n_key = record.keypoints.shape[0] if record.keypoints is not None else 0
    beta = cfg.lif_params.beta
    for li in range(len(cfg.lif_layers)):
        w_in = model.values(f"lif{li}.input")
        w_rec = model.values(f"lif{li}.recurrent")
        spikes_t = record.lif_spikes[li]  # K x units
        if li == 0:
            macs += n_key * _nnz(w_in)  # real-valued features in
        else:
            prev_spikes = record.lif_spikes[li - 1]
            col_nnz = np.count_nonzero(w_in, axis=0)
            acs += int((prev_spikes @ col_nnz).sum())
        if beta != 0.0:
            macs += _nnz(record.lif_membrane_prev[li])
        rec_col_nnz = np.count_nonzero(w_rec, axis=0)
        if n_key > 1:
            acs += int((spikes_t[:-1] @ rec_col_nnz).sum())

    w_ro = model.values("readout.weight")
    if cfg.readout_mode == "membrane":
        macs += n_key * _nnz(w_ro)
    else:
        last_spikes = record.lif_spikes[-1]
        ro_col_nnz = np.count_nonzero(w_ro, axis=0)
        macs += int((last_spikes @ ro_col_nnz).sum())
    if cfg.readout_beta != 0.0 and n_key > 1:
        u_prev = record.keypoints[:-1]
        macs += _nnz(u_prev)

    return OpCounts(macs=int(macs), acs=int(acs),
                    num_bins=spikes.num_bins, num_keypoints=n_key)


# ---------------------------------------------------------------------------
# footprint and sparsity


@dataclass(frozen=True)
class FootprintReport:
    """Stored bytes: per-tensor bit-packed parameters plus ring buffers."""

    param_bytes: int
    param_nonzero_bytes: int
    buffer_bytes: int

    @property
    def total_bytes(self) -> int:
        return self.param_bytes + self.buffer_bytes

    @property
    def total_nonzero_bytes(self) -> int:
        return self.param_nonzero_bytes + self.buffer_bytes


def footprint(model: NetworkModel) -> FootprintReport:
    """Memory footprint of parameters and streaming buffers.

    Parameters pack at their stored width (sign + integer + fraction bits
    for fixed point, 32 for float), rounded up to whole bytes per tensor.
    Buffer bytes cover the per-layer streaming ring buffers at the buffer
    format's width (32-bit float when unquantized); the nonzero variant
    drops exactly-zero parameters but keeps the buffers.
    """
    param_bytes = 0
    nonzero_bytes = 0
    for p in model.parameters.values():
        bits = p.stored_bits
        param_bytes += -(-p.data.size * bits // 8)
        nonzero_bytes += -(-_nnz(p.data) * bits // 8)

    plan = compute_plan(model.config.stack_spec())
    channels = model.config.channel_counts()
    buf_bits = (model.config.buffer_format.total_bits
                if model.config.buffer_format is not None else 32)
    buffer_bits = sum(b * c for b, c in zip(plan.b_keypoints, channels)) * buf_bits
    return FootprintReport(
        param_bytes=param_bytes,
        param_nonzero_bytes=nonzero_bytes,
        buffer_bytes=-(-buffer_bits // 8),
    )


def sparsity(model: NetworkModel, spikes: SpikeStream,
             record: ForwardRecord | None = None):
    """(connection, activation) sparsity fractions.

    Connection sparsity is the share of exactly-zero parameter entries;
    activation sparsity is the share of silent spike opportunities
    (units x keypoint steps) over an inference run.
    """
    total = sum(p.data.size for p in model.parameters.values())
    zeros = sum(p.data.size - _nnz(p.data) for p in model.parameters.values())
    connection = zeros / total if total else 0.0
    if record is None:
        _, _, record = offline_forward(model, spikes, record=True)
    opportunities = record.spike_opportunities
    activation = 1.0 - record.total_spikes / opportunities if opportunities else 1.0
    return connection, activation


# ---------------------------------------------------------------------------
# regularization terms (reported as metrics, not used in training here)


def weight_reg_term(model: NetworkModel, lambda_w: float = DEFAULT_WEIGHT_REG) -> float:
    """lambda_w times the total absolute value of all parameters."""
    total = sum(float(np.abs(p.values).sum()) for p in model.parameters.values())
    return lambda_w * total


def spike_reg_term(spike_log, lambda_s: float = DEFAULT_SPIKE_REG) -> float:
    """lambda_s times the total spike count of a run.

    Accepts a ForwardRecord or a plain spike count.
    """
    if isinstance(spike_log, ForwardRecord):
        total = spike_log.total_spikes
    else:
        total = int(spike_log)
    return lambda_s * total


# ---------------------------------------------------------------------------
# combined report


@dataclass(frozen=True)
class ResourceReport:
    footprint_bytes: int
    footprint_nonzero_bytes: int
    macs_per_inference_step: float
    acs_per_inference_step: float
    connection_sparsity: float
    activation_sparsity: float

    def __post_init__(self):
        if not (0.0 <= self.connection_sparsity <= 1.0
                and 0.0 <= self.activation_sparsity <= 1.0):
            raise ValueError("sparsities must lie in [0, 1]")
        if self.footprint_nonzero_bytes > self.footprint_bytes:
            raise ValueError("nonzero footprint cannot exceed the total")


def resource_report(model: NetworkModel, spikes: SpikeStream) -> ResourceReport:
    """One inference run distilled into the co-optimization quantities."""
    _, _, record = offline_forward(model, spikes, record=True)
    ops = count_ops(model, spikes, record=record)
    feet = footprint(model)
    conn, act = sparsity(model, spikes, record=record)
    return ResourceReport(
        footprint_bytes=feet.total_bytes,
        footprint_nonzero_bytes=feet.total_nonzero_bytes,
        macs_per_inference_step=ops.macs_per_step,
        acs_per_inference_step=ops.acs_per_step,
        connection_sparsity=conn,
        activation_sparsity=act,
    )
