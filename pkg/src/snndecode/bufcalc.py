"""Buffer-size calculus for streaming conv/pool stacks.

Given the kernel/stride layout of a temporal conv front-end (layers
alternate convolution, pooling), this module derives everything the
streaming runtime needs:

* the receptive field ``R`` of one keypoint (how many input bins feed it),
* per-layer buffer sizes: the window per keypoint, the new-data quota a
  layer must collect before the next keypoint, and the new-data window
  (quota plus kernel context) each layer processes incrementally,
* the interpolation factor (product of all strides),
* latency and execution rate, and a realtime verdict.

Latency is half the first-layer buffer plus one step: the front-end is
trained with centered kernels, so a streamed output describes the middle
of its input window, which is ``floor(R/2) + 1`` bins in the past.
"""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = [
    "StackSpec",
    "BufferPlan",
    "RealtimeVerdict",
    "receptive_field_and_updates",
    "bsize_keypoints",
    "bsize_new_data_update",
    "bsize_new_data",
    "latency",
    "execution_rate",
    "compute_plan",
    "realtime_check",
    "latency_vs_kernel_sweep",
    "MAX_LATENCY_MS",
    "MIN_EXECUTION_RATE_HZ",
]

# a decoder counts as realtime-capable up to 100 ms delay (the brain-to-
# muscle latency that users stop noticing) and down to 10 Hz output rate
MAX_LATENCY_MS = 100.0
MIN_EXECUTION_RATE_HZ = 10.0


@dataclass(frozen=True)
class StackSpec:
    """Kernel/stride layout of an alternating conv/pool stack."""

    conv_kernels: tuple
    conv_strides: tuple
    pool_kernels: tuple
    pool_strides: tuple
    step_ms: float = 4.0

    def __post_init__(self):
        object.__setattr__(self, "conv_kernels", tuple(int(k) for k in self.conv_kernels))
        object.__setattr__(self, "conv_strides", tuple(int(s) for s in self.conv_strides))
        object.__setattr__(self, "pool_kernels", tuple(int(k) for k in self.pool_kernels))
        object.__setattr__(self, "pool_strides", tuple(int(s) for s in self.pool_strides))
        n = len(self.conv_kernels)
        if n < 1:
            raise ValueError("need at least one conv layer")
        if not (len(self.conv_strides) == len(self.pool_kernels) == len(self.pool_strides) == n):
            raise ValueError("kernel/stride lists must all have the same length")
        for name, values in (
            ("conv kernel", self.conv_kernels),
            ("conv stride", self.conv_strides),
            ("pool kernel", self.pool_kernels),
            ("pool stride", self.pool_strides),
        ):
            if any(v < 1 for v in values):
                raise ValueError(f"{name} entries must be >= 1")
        if self.step_ms <= 0:
            raise ValueError("step_ms must be positive")

    @property
    def num_conv_layers(self) -> int:
        return len(self.conv_kernels)


@dataclass(frozen=True)
class BufferPlan:
    """Everything the streaming runtime needs to size its buffers."""

    spec: StackSpec
    receptive_field: int
    b_keypoints: tuple
    b_new_data: tuple
    b_new_data_update: tuple
    interpolation_factor: int
    latency_steps: int
    latency_ms: float
    execution_rate_hz: float
    r_history: tuple = field(default=(), repr=False)

    def layer_kinds(self):
        """('conv', 'pool', 'conv', ...) matching the buffer lists."""
        return tuple("conv" if i % 2 == 0 else "pool" for i in range(2 * self.spec.num_conv_layers))


@dataclass(frozen=True)
class RealtimeVerdict:
    capable: bool
    reasons: tuple

    def __bool__(self) -> bool:
        return self.capable


def receptive_field_and_updates(spec: StackSpec):
    """Walk the stack front to back accumulating receptive field and stride.

    Returns ``(R, r_history, b_update_history)`` where entry ``i`` of each
    history is the state after layer ``i`` (even = conv, odd = pool).  Each
    layer widens the field by ``(kernel - 1) * jump`` and multiplies the
    jump (``B_update``) by its stride.
    """
    r = 1
    b_update = 1
    r_list = []
    b_update_list = []
    for i in range(2 * spec.num_conv_layers):
        if i % 2 == 0:
            k, s = spec.conv_kernels[i // 2], spec.conv_strides[i // 2]
        else:
            k, s = spec.pool_kernels[(i - 1) // 2], spec.pool_strides[(i - 1) // 2]
        r = (k - 1) * b_update + r
        b_update = b_update * s
        r_list.append(r)
        b_update_list.append(b_update)
    return r, tuple(r_list), tuple(b_update_list)


def bsize_keypoints(r: int, conv_kernels, pool_strides):
    """Per-layer input window sizes needed to produce one keypoint.

    Starting from the full receptive field, each conv (stride 1) consumes
    ``kernel - 1`` entries and each pool divides by its stride.  A
    fractional division means the stack cannot emit keypoints at a steady
    cadence, so it is rejected instead of floored.
    """
    conv_kernels = list(conv_kernels)
    pool_strides = list(pool_strides)
    c = int(r)
    out = []
    for i in range(2 * len(conv_kernels)):
        if i % 2 == 0:
            out.append(c)
        else:
            c = c - conv_kernels[i // 2] + 1
            out.append(c)
            if c % pool_strides[i // 2] != 0:
                raise ValueError(
                    f"inconsistent stack: layer {i} buffer {c} is not divisible "
                    f"by pool stride {pool_strides[i // 2]}"
                )
            c //= pool_strides[i // 2]
    return out


def bsize_new_data_update(b_update_list):
    """New-entry quota per layer before the next keypoint can be produced."""
    b = list(b_update_list)
    if not b:
        raise ValueError("empty update history")
    b.append(b[-1])
    b.reverse()
    b.pop()
    return b


def bsize_new_data(b_new_data_update, conv_kernels):
    """Window each layer processes per update: quota plus kernel context.

    Conv layers (even positions) need ``quota - 1 + kernel`` entries to
    compute their new outputs without touching older columns; pool layers
    consume exactly their quota.
    """
    conv_kernels = list(conv_kernels)
    b_new_data_update = list(b_new_data_update)
    if len(b_new_data_update) != 2 * len(conv_kernels):
        raise ValueError("update list length must be twice the number of conv layers")
    out = []
    for i, b in enumerate(b_new_data_update):
        if i % 2 == 0:
            out.append(b - 1 + conv_kernels[i // 2])
        else:
            out.append(b)
    return out


def latency(receptive_field: int, step_ms: float):
    """(steps, ms): half the first-layer buffer plus one step."""
    steps = receptive_field // 2 + 1
    return steps, steps * step_ms


def execution_rate(interpolation_factor: int, step_ms: float) -> float:
    """Keypoint rate in Hz: one keypoint per ``r_int`` input bins."""
    if interpolation_factor < 1:
        raise ValueError("interpolation factor must be >= 1")
    return 1000.0 / (interpolation_factor * step_ms)


def compute_plan(spec: StackSpec) -> BufferPlan:
    """Run the full calculus for a stack."""
    r, r_list, b_update_list = receptive_field_and_updates(spec)
    b_upd = bsize_new_data_update(b_update_list)
    plan = BufferPlan(
        spec=spec,
        receptive_field=r,
        b_keypoints=tuple(bsize_keypoints(r, spec.conv_kernels, spec.pool_strides)),
        b_new_data=tuple(bsize_new_data(b_upd, spec.conv_kernels)),
        b_new_data_update=tuple(b_upd),
        interpolation_factor=b_update_list[-1],
        latency_steps=latency(r, spec.step_ms)[0],
        latency_ms=latency(r, spec.step_ms)[1],
        execution_rate_hz=execution_rate(b_update_list[-1], spec.step_ms),
        r_history=r_list,
    )
    assert plan.b_keypoints[0] == r
    assert plan.b_new_data_update[0] == plan.interpolation_factor
    return plan


def realtime_check(plan: BufferPlan,
                   max_latency_ms: float = MAX_LATENCY_MS,
                   min_rate_hz: float = MIN_EXECUTION_RATE_HZ) -> RealtimeVerdict:
    """Both bounds are inclusive: at most 100 ms delay, at least 10 Hz."""
    reasons = []
    if plan.latency_ms > max_latency_ms:
        reasons.append(
            f"latency {plan.latency_ms:g} ms exceeds the {max_latency_ms:g} ms limit"
        )
    if plan.execution_rate_hz < min_rate_hz:
        reasons.append(
            f"execution rate {plan.execution_rate_hz:g} Hz is below the "
            f"{min_rate_hz:g} Hz minimum"
        )
    if not reasons:
        reasons.append(
            f"latency {plan.latency_ms:g} ms <= {max_latency_ms:g} ms and "
            f"rate {plan.execution_rate_hz:g} Hz >= {min_rate_hz:g} Hz"
        )
        return RealtimeVerdict(True, tuple(reasons))
    return RealtimeVerdict(False, tuple(reasons))


def doubling_stack(first_kernel: int, num_layers: int, step_ms: float = 4.0) -> StackSpec:
    """The decoder's standard layout: kernels double per layer, pool 2/2."""
    kernels = [first_kernel * (2 ** i) for i in range(num_layers)]
    return StackSpec(
        conv_kernels=kernels,
        conv_strides=[1] * num_layers,
        pool_kernels=[2] * num_layers,
        pool_strides=[2] * num_layers,
        step_ms=step_ms,
    )


def latency_vs_kernel_sweep(first_kernels, num_layers: int, step_ms: float = 4.0):
    """Receptive field and latency per first-kernel size.

    One row ``(first_kernel, receptive_field, latency_ms)`` per entry, for
    the standard doubling-kernel, pool-2/2 layout with the given depth.
    """
    rows = []
    for k in first_kernels:
        plan = compute_plan(doubling_stack(k, num_layers, step_ms))
        rows.append((k, plan.receptive_field, plan.latency_ms))
    return rows
