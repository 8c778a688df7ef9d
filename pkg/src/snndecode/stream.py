"""Ring-buffered incremental inference.

The runtime ingests one spike bin at a time and produces exactly the same
keypoints and interpolated velocities as whole-sequence inference, never
recomputing a column: each layer owns a ring buffer sized by the buffer
plan, produces a new output column as soon as its window completes, and
forwards it downstream.  The LIF core persists across pushes, so a stream
can be fed in arbitrary chunks.

Emission timing follows the plan exactly: the first keypoint appears once
``receptive_field`` bins have arrived and a new one every
``interpolation_factor`` bins after that, each bringing its
``interpolation_factor`` interpolated velocity samples.  Nothing is
emitted before the first keypoint (apart from warmup events, which carry
a zero velocity only when the stream was opened with
``emit_zero_during_warmup=True`` -- a convenience with no fidelity claim).

Reported timestamps subtract the model latency (half the first-layer
buffer plus one step) from the emission time, so each sample is stamped
with the wall-clock moment it describes under the centered-kernel
training convention: sample ``s`` carries
``(s + R - r_int + 1 - latency_steps) * step_ms``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .bufcalc import compute_plan
from .model import (
    Engine,
    NetworkModel,
    SpikeStream,
    Trajectory,
    check_bin_width,
    interp_segment,
    offline_forward,
)

__all__ = [
    "KEYPOINT",
    "VELOCITY_SAMPLE",
    "WARMUP",
    "StreamEvent",
    "StreamState",
    "PushTimingStats",
    "EquivalenceReport",
    "stream_init",
    "push_bin",
    "run_stream",
    "equivalence_report",
]

KEYPOINT = "keypoint"
VELOCITY_SAMPLE = "velocity_sample"
WARMUP = "warmup"


@dataclass(frozen=True)
class StreamEvent:
    kind: str
    time_index: int
    payload: np.ndarray | None = None


class RingBuffer:
    """Fixed-capacity store of the newest columns of a C x T signal."""

    def __init__(self, channels: int, capacity: int, dtype):
        self.capacity = capacity
        self.data = np.zeros((channels, capacity), dtype=dtype)
        self.write = 0  # next slot to overwrite
        self.count = 0  # valid columns, <= capacity

    def push(self, cols: np.ndarray):
        n = cols.shape[1]
        if n > self.capacity:
            raise ValueError(f"cannot push {n} columns into capacity {self.capacity}")
        for j in range(n):
            self.data[:, self.write] = cols[:, j]
            self.write = (self.write + 1) % self.capacity
        self.count = min(self.count + n, self.capacity)

    def last(self, n: int) -> np.ndarray:
        """Contiguous copy of the newest n columns, oldest first."""
        if n > self.count:
            raise ValueError(f"only {self.count} columns buffered, wanted {n}")
        start = (self.write - n) % self.capacity
        if start + n <= self.capacity:
            return self.data[:, start:start + n].copy()
        head = self.data[:, start:]
        tail = self.data[:, : (start + n) % self.capacity]
        return np.concatenate([head, tail], axis=1)


class StreamState:
    """All mutable state of one stream; single-writer, nothing shared."""

    def __init__(self, model: NetworkModel, emit_zero_during_warmup: bool = False):
        self.model = model
        self.plan = compute_plan(model.config.stack_spec())
        self.engine = Engine(model)
        self.emit_zero_during_warmup = emit_zero_during_warmup

        dtype = np.int64 if self.engine.quantized else np.float64
        channels = model.config.channel_counts()
        self.rings = [
            RingBuffer(channels[i], self.plan.b_keypoints[i], dtype)
            for i in range(len(self.plan.b_keypoints))
        ]
        self.arrived = [0] * len(self.rings)
        self.produced = [0] * len(self.rings)
        self.lif_states, self.readout_u = self.engine.new_core_state()
        self.last_keypoint: np.ndarray | None = None
        self.samples_ingested = 0
        self.keypoints_emitted = 0
        self.samples_emitted = 0

    @property
    def r_int(self) -> int:
        return self.plan.interpolation_factor

    def buffer_capacities(self):
        return [r.capacity for r in self.rings]


def stream_init(model: NetworkModel, emit_zero_during_warmup: bool = False) -> StreamState:
    """Fresh stream: empty ring buffers, zero LIF state, plan embedded."""
    return StreamState(model, emit_zero_during_warmup=emit_zero_during_warmup)


def push_bin(state: StreamState, spike_bin: np.ndarray):
    """Ingest one spike bin; returns the events it triggered.

    A layer computes an output column only once per window, reading just
    the newest ``kernel`` columns of its ring, so the per-keypoint work
    matches the new-data buffer sizes with no recomputation.
    """
    spike_bin = np.asarray(spike_bin)
    cfg = state.model.config
    if spike_bin.shape != (cfg.input_channels,):
        raise ValueError(
            f"expected a bin of {cfg.input_channels} channels, got shape {spike_bin.shape}"
        )
    if not np.issubdtype(spike_bin.dtype, np.integer) or spike_bin.min() < 0:
        raise ValueError("spike bins must hold non-negative integer counts")

    engine = state.engine
    state.samples_ingested += 1
    cols = engine.ingest(spike_bin[:, None].astype(np.int64))

    for i, entry in enumerate(engine.front):
        if cols.shape[1] == 0:
            break
        ring = state.rings[i]
        ring.push(cols)
        state.arrived[i] += cols.shape[1]
        kind = entry[0]
        if kind == "conv":
            kernel = entry[3].kernel
            n_new = max(0, state.arrived[i] - kernel + 1) - state.produced[i]
            if n_new <= 0:
                cols = cols[:, :0]
                continue
            window = ring.last(n_new + kernel - 1)
            cols = engine.conv_columns(i, window)
        else:
            kernel = entry[1].kernel
            n_new = state.arrived[i] // kernel - state.produced[i]
            if n_new <= 0:
                cols = cols[:, :0]
                continue
            cols = engine.pool_columns(i, ring.last(n_new * kernel))
        state.produced[i] += n_new

    events = []
    if cols.shape[1] > 0:
        for j in range(cols.shape[1]):
            state.lif_states, state.readout_u, keypoint = engine.core_step(
                state.lif_states, state.readout_u, cols[:, j]
            )
            events.append(StreamEvent(KEYPOINT, state.keypoints_emitted, keypoint))
            if state.keypoints_emitted == 0:
                segment = np.repeat(keypoint[None, :], state.r_int, axis=0)
            else:
                segment = interp_segment(state.last_keypoint, keypoint, state.r_int)
            for row in segment:
                events.append(StreamEvent(VELOCITY_SAMPLE, state.samples_emitted, row))
                state.samples_emitted += 1
            state.last_keypoint = keypoint
            state.keypoints_emitted += 1

    if not events and state.keypoints_emitted == 0:
        payload = np.zeros(2) if state.emit_zero_during_warmup else None
        events.append(StreamEvent(WARMUP, state.samples_ingested - 1, payload))
    return events


@dataclass
class PushTimingStats:
    """Wall-time distribution of push_bin calls, microseconds."""

    count: int
    mean_us: float
    p50_us: float
    p90_us: float
    p99_us: float
    max_us: float

    @classmethod
    def from_durations_ns(cls, durations) -> "PushTimingStats":
        if not len(durations):
            return cls(0, 0.0, 0.0, 0.0, 0.0, 0.0)
        us = np.asarray(durations, dtype=np.float64) / 1e3
        return cls(
            count=len(us),
            mean_us=float(us.mean()),
            p50_us=float(np.percentile(us, 50)),
            p90_us=float(np.percentile(us, 90)),
            p99_us=float(np.percentile(us, 99)),
            max_us=float(us.max()),
        )


def stream_trajectory_start_ms(state: StreamState) -> float:
    """Timestamp of output sample 0 under the latency convention."""
    plan = state.plan
    shift = plan.receptive_field - plan.interpolation_factor + 1 - plan.latency_steps
    return shift * state.model.config.step_ms


def run_stream(model: NetworkModel, spikes: SpikeStream,
               emit_zero_during_warmup: bool = False):
    """Fold push_bin over a whole stream.

    Returns ``(trajectory, events, timing)``.  The trajectory collects
    the velocity-sample events; its timestamps subtract
    ``latency_steps`` from the emission bin as described in the module
    docstring.
    """
    if spikes.channels != model.config.input_channels:
        raise ValueError(
            f"model expects {model.config.input_channels} channels, "
            f"stream has {spikes.channels}"
        )
    check_bin_width(model.config, spikes)
    state = stream_init(model, emit_zero_during_warmup=emit_zero_during_warmup)
    events = []
    samples = []
    durations = []
    for t in range(spikes.num_bins):
        t0 = time.perf_counter_ns()
        new_events = push_bin(state, spikes.counts[:, t])
        durations.append(time.perf_counter_ns() - t0)
        events.extend(new_events)
        samples.extend(e.payload for e in new_events if e.kind == VELOCITY_SAMPLE)

    samples = np.asarray(samples, dtype=np.float64).reshape(-1, 2)
    trajectory = Trajectory(
        start_ms=stream_trajectory_start_ms(state),
        step_ms=model.config.step_ms,
        samples=samples,
    )
    return trajectory, events, PushTimingStats.from_durations_ns(durations)


@dataclass
class EquivalenceReport:
    """Streaming vs offline agreement on the overlapping output region."""

    n_keypoints: int
    n_samples: int
    max_abs_diff_keypoints: float
    max_abs_diff_samples: float
    max_rel_diff: float
    exact: bool
    empty_overlap: bool = False

    def summary(self) -> str:
        if self.empty_overlap:
            return "no overlap: input shorter than the receptive field"
        return (
            f"{self.n_keypoints} keypoints / {self.n_samples} samples compared; "
            f"max |diff| keypoints {self.max_abs_diff_keypoints:.3g}, "
            f"samples {self.max_abs_diff_samples:.3g}, "
            f"relative {self.max_rel_diff:.3g}"
            + (" (bit-exact)" if self.exact else "")
        )


def equivalence_report(model: NetworkModel, spikes: SpikeStream) -> EquivalenceReport:
    """Run both paths and compare outputs index by index.

    Quantized models must agree exactly; float models to within float
    rounding (both paths use the same column kernels, so in practice the
    difference is zero there too).
    """
    plan = compute_plan(model.config.stack_spec())
    if spikes.num_bins < plan.receptive_field:
        return EquivalenceReport(0, 0, 0.0, 0.0, 0.0, exact=True, empty_overlap=True)

    off_keypoints, off_traj = offline_forward(model, spikes)
    st_traj, events, _ = run_stream(model, spikes)
    st_keypoints = np.asarray(
        [e.payload for e in events if e.kind == KEYPOINT], dtype=np.float64
    ).reshape(-1, 2)

    n_kp = min(len(off_keypoints), len(st_keypoints))
    n_s = min(len(off_traj), len(st_traj))
    kp_diff = float(np.max(np.abs(off_keypoints[:n_kp] - st_keypoints[:n_kp]))) if n_kp else 0.0
    s_diff = float(
        np.max(np.abs(off_traj.samples[:n_s] - st_traj.samples[:n_s]))
    ) if n_s else 0.0
    scale = float(np.max(np.abs(off_traj.samples[:n_s]))) if n_s else 0.0
    rel = max(kp_diff, s_diff) / max(scale, 1e-30)
    return EquivalenceReport(
        n_keypoints=n_kp,
        n_samples=n_s,
        max_abs_diff_keypoints=kp_diff,
        max_abs_diff_samples=s_diff,
        max_rel_diff=rel,
        exact=(kp_diff == 0.0 and s_diff == 0.0 and n_kp == len(off_keypoints)
               and n_s == len(off_traj)),
    )
