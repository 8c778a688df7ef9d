import numpy as np
import pytest

from snndecode.bufcalc import compute_plan
from snndecode.model import (
    ConvLayerSpec,
    LifParams,
    NetworkConfig,
    NetworkModel,
    Param,
    PoolLayerSpec,
    SpikeStream,
    init_model,
    offline_forward,
)
from snndecode.stream import (
    KEYPOINT,
    VELOCITY_SAMPLE,
    WARMUP,
    RingBuffer,
    equivalence_report,
    push_bin,
    run_stream,
    stream_init,
    stream_trajectory_start_ms,
)
from oracle_utils import random_model, random_spikes


def small_realtime_model(seed=0, quantized=False):
    from snndecode.fxp import Q1_4, Q1_7

    cfg = NetworkConfig(
        input_channels=3,
        conv_layers=(ConvLayerSpec(4, 9), ConvLayerSpec(4, 18)),
        pool_layers=(PoolLayerSpec(2, 2), PoolLayerSpec(2, 2)),
        lif_layers=(5,),
        lif_params=LifParams(beta=0.8, threshold=0.6),
        weight_format=Q1_7 if quantized else None,
        buffer_format=Q1_4 if quantized else None,
    )
    return init_model(cfg, np.random.default_rng(seed), weight_scale=0.5)


def identity_stack_model(seed=0):
    cfg = NetworkConfig(
        input_channels=2,
        conv_layers=(ConvLayerSpec(3, 1),),
        pool_layers=(PoolLayerSpec(1, 1),),
        lif_layers=(3,),
    )
    return init_model(cfg, np.random.default_rng(seed))


def test_ring_buffer_wraps_and_reads_back():
    ring = RingBuffer(2, 4, np.float64)
    for t in range(10):
        ring.push(np.array([[t], [10 * t]], dtype=np.float64))
    assert ring.count == 4
    last3 = ring.last(3)
    assert np.array_equal(last3[0], [7, 8, 9])
    assert np.array_equal(last3[1], [70, 80, 90])
    with pytest.raises(ValueError):
        ring.last(5)


def test_stream_init_buffer_capacities():
    state = stream_init(small_realtime_model())
    assert state.buffer_capacities() == [46, 38, 19, 2]
    assert state.samples_ingested == 0
    assert stream_init(identity_stack_model()).buffer_capacities() == [1, 1]


def test_stream_init_benchmark_capacities():
    cfg = NetworkConfig(
        input_channels=2,
        conv_layers=(ConvLayerSpec(2, 31), ConvLayerSpec(2, 62), ConvLayerSpec(2, 124)),
        pool_layers=(PoolLayerSpec(2, 2),) * 3,
        lif_layers=(3,),
    )
    model = init_model(cfg, np.random.default_rng(0))
    assert stream_init(model).buffer_capacities() == [652, 622, 311, 250, 125, 2]


def test_warmup_then_first_keypoint_at_receptive_field():
    rng = np.random.default_rng(1)
    model = small_realtime_model()
    state = stream_init(model)
    for t in range(45):
        events = push_bin(state, rng.integers(0, 2, size=3))
        assert [e.kind for e in events] == [WARMUP]
        assert events[0].payload is None
    events = push_bin(state, rng.integers(0, 2, size=3))
    kinds = [e.kind for e in events]
    assert kinds == [KEYPOINT] + [VELOCITY_SAMPLE] * 4


def test_keypoint_cadence_every_r_int_bins():
    rng = np.random.default_rng(2)
    model = small_realtime_model()
    state = stream_init(model)
    emitted_at = []
    for t in range(1, 101):
        events = push_bin(state, rng.integers(0, 2, size=3))
        if any(e.kind == KEYPOINT for e in events):
            emitted_at.append(t)
            assert sum(e.kind == VELOCITY_SAMPLE for e in events) == 4
    assert emitted_at[0] == 46
    assert all(b - a == 4 for a, b in zip(emitted_at, emitted_at[1:]))
    # emission rule: a keypoint exists iff ingested >= R + emitted * r_int
    assert state.keypoints_emitted == (100 - 46) // 4 + 1


def test_zero_weight_model_streams_zero_velocities():
    cfg = small_realtime_model().config
    params = {name: Param(np.zeros(shape)) for name, shape in cfg.param_shapes().items()}
    model = NetworkModel(cfg, params)
    traj, events, _ = run_stream(model, random_spikes(np.random.default_rng(3), 3, 60))
    assert len(traj) > 0
    assert np.all(traj.samples == 0.0)


def test_run_stream_counts():
    rng = np.random.default_rng(4)
    model = small_realtime_model()
    traj, events, timing = run_stream(model, random_spikes(rng, 3, 46))
    assert sum(e.kind == KEYPOINT for e in events) == 1
    assert len(traj) == 4
    assert timing.count == 46
    for m in (5, 11):
        traj, events, _ = run_stream(model, random_spikes(rng, 3, 46 + 4 * m))
        assert sum(e.kind == KEYPOINT for e in events) == 1 + m


def test_run_stream_empty_input():
    model = small_realtime_model()
    traj, events, timing = run_stream(model, SpikeStream(3, 4.0, np.zeros((3, 0), dtype=np.int64)))
    assert len(traj) == 0
    assert events == []
    assert timing.count == 0


def test_push_bin_validates_input():
    state = stream_init(small_realtime_model())
    with pytest.raises(ValueError, match="channels"):
        push_bin(state, np.zeros(2, dtype=np.int64))
    with pytest.raises(ValueError, match="non-negative integer"):
        push_bin(state, np.array([0.5, 0.5, 0.5]))
    with pytest.raises(ValueError, match="non-negative integer"):
        push_bin(state, np.array([-1, 0, 0]))


def test_warmup_zero_payload_flag():
    state = stream_init(small_realtime_model(), emit_zero_during_warmup=True)
    events = push_bin(state, np.zeros(3, dtype=np.int64))
    assert events[0].kind == WARMUP
    assert np.array_equal(events[0].payload, np.zeros(2))


def test_streaming_equals_offline_float_k9_stack():
    rng = np.random.default_rng(5)
    model = small_realtime_model()
    spikes = random_spikes(rng, 3, 46 + 4 * 9)
    report = equivalence_report(model, spikes)
    assert report.n_keypoints == 10
    assert report.max_rel_diff <= 1e-6
    assert report.exact  # shared column kernels make float agreement exact too


def test_streaming_equals_offline_quantized_k9_stack():
    rng = np.random.default_rng(6)
    model = small_realtime_model(quantized=True)
    spikes = random_spikes(rng, 3, 46 + 4 * 9)
    report = equivalence_report(model, spikes)
    assert report.max_abs_diff_keypoints == 0.0
    assert report.max_abs_diff_samples == 0.0
    assert report.exact


def test_streaming_equals_offline_random_models():
    rng = np.random.default_rng(7)
    for i in range(20):
        model = random_model(rng, quantized=bool(i % 2))
        plan = compute_plan(model.config.stack_spec())
        t = plan.receptive_field + plan.interpolation_factor * int(rng.integers(3, 7))
        spikes = random_spikes(rng, model.config.input_channels, t)
        report = equivalence_report(model, spikes)
        assert report.exact, f"model {i}: {report.summary()}"


def test_equivalence_empty_overlap_short_input():
    model = small_realtime_model()
    report = equivalence_report(model, random_spikes(np.random.default_rng(8), 3, 20))
    assert report.empty_overlap
    assert report.n_keypoints == 0
    assert "no overlap" in report.summary()


def test_chunked_streaming_matches_single_pass():
    rng = np.random.default_rng(9)
    model = small_realtime_model(quantized=True)
    spikes = random_spikes(rng, 3, 90)

    whole = stream_init(model)
    whole_events = []
    for t in range(90):
        whole_events.extend(push_bin(whole, spikes.counts[:, t]))

    chunked = stream_init(model)
    chunk_events = []
    for chunk in (spikes.counts[:, :31], spikes.counts[:, 31:64], spikes.counts[:, 64:]):
        for t in range(chunk.shape[1]):
            chunk_events.extend(push_bin(chunked, chunk[:, t]))

    assert len(whole_events) == len(chunk_events)
    for a, b in zip(whole_events, chunk_events):
        assert a.kind == b.kind and a.time_index == b.time_index
        if a.payload is not None:
            assert np.array_equal(a.payload, b.payload)


def test_incremental_conv_work_matches_new_data_plan():
    rng = np.random.default_rng(10)
    model = small_realtime_model()
    plan = compute_plan(model.config.stack_spec())
    weight_sizes = [model.param(f"conv{i}.weight").data.size
                    for i in range(len(model.config.conv_layers))]
    implied = sum(
        (plan.b_new_data[2 * i] - model.config.conv_layers[i].kernel + 1) * weight_sizes[i]
        for i in range(len(weight_sizes))
    )
    state = stream_init(model)
    mul_at_keypoint = []
    for t in range(46 + 4 * 8):
        events = push_bin(state, rng.integers(0, 2, size=3))
        if any(e.kind == KEYPOINT for e in events):
            mul_at_keypoint.append(state.engine.mul_count)
    deltas = np.diff(mul_at_keypoint)
    assert len(deltas) >= 5
    assert np.all(deltas == implied)


def test_streamed_trajectory_timestamps_reflect_latency():
    model = small_realtime_model()
    plan = compute_plan(model.config.stack_spec())
    spikes = random_spikes(np.random.default_rng(11), 3, 60)
    traj, events, _ = run_stream(model, spikes)
    assert plan.latency_steps == plan.receptive_field // 2 + 1
    expected_start = (
        plan.receptive_field - plan.interpolation_factor + 1 - plan.latency_steps
    ) * model.config.step_ms
    assert traj.start_ms == expected_start
    assert traj.start_ms == stream_trajectory_start_ms(stream_init(model))
    # anchor of keypoint j is stamped with its emission time minus latency
    anchor_idx = plan.interpolation_factor - 1
    anchor_time = traj.times_ms()[anchor_idx]
    emission_ms = plan.receptive_field * model.config.step_ms
    assert anchor_time == emission_ms - plan.latency_steps * model.config.step_ms
