import numpy as np
import pytest

from snndecode.bufcalc import compute_plan
from snndecode.fxp import Q1_4, Q1_7
from snndecode.model import (
    ConvLayerSpec,
    LifParams,
    LifState,
    NetworkConfig,
    NetworkModel,
    Param,
    PoolLayerSpec,
    SpikeStream,
    Trajectory,
    conv1d_forward,
    init_model,
    interpolate_linear,
    lif_step,
    offline_forward,
    pool_forward,
    quantize_model,
    readout_step,
)
from oracle_utils import random_model, random_spikes, simulate_lengths


def small_realtime_config(**overrides):
    base = dict(
        input_channels=3,
        conv_layers=(ConvLayerSpec(4, 9), ConvLayerSpec(4, 18)),
        pool_layers=(PoolLayerSpec(2, 2), PoolLayerSpec(2, 2)),
        lif_layers=(5,),
        lif_params=LifParams(beta=0.8, threshold=0.6),
    )
    base.update(overrides)
    return NetworkConfig(**base)


# ---------------------------------------------------------------------------
# conv / pool


def test_conv_zero_input_yields_bias():
    x = np.zeros((2, 7))
    w = np.ones((3, 2, 4))
    b = np.array([1.5, -0.5, 0.0])
    out = conv1d_forward(x, w, b)
    assert out.shape == (3, 4)
    assert np.allclose(out, b[:, None])


def test_conv_hand_example():
    out = conv1d_forward(np.array([[1.0, 2.0, 3.0, 4.0]]), np.array([[[1.0, 1.0]]]))
    assert np.array_equal(out, np.array([[3.0, 5.0, 7.0]]))


def test_conv_valid_length_kernel9():
    out = conv1d_forward(np.zeros((1, 46)), np.zeros((1, 1, 9)))
    assert out.shape[1] == 38


def test_conv_same_mode_length():
    for t in (10, 11, 17):
        for stride in (1, 2):
            out = conv1d_forward(np.zeros((1, t)), np.ones((1, 1, 4)), stride=stride,
                                 mode="same")
            assert out.shape[1] == -(-t // stride)


def test_conv_is_cross_correlation():
    # an asymmetric kernel applied without flipping
    out = conv1d_forward(np.array([[1.0, 0.0, 0.0]]), np.array([[[1.0, 2.0, 3.0]]]))
    assert out[0, 0] == 1.0


def test_conv_short_input_errors():
    with pytest.raises(ValueError, match="shorter than kernel"):
        conv1d_forward(np.zeros((1, 3)), np.zeros((1, 1, 5)))


def test_pool_hand_example():
    out = pool_forward(np.array([[2.0, 4.0, 6.0, 8.0]]), kernel=2, stride=2)
    assert np.array_equal(out, np.array([[3.0, 7.0]]))


def test_pool_constant_input():
    out = pool_forward(np.full((3, 9), 2.5), kernel=3, stride=2)
    assert np.allclose(out, 2.5)


def test_pool_length_38_to_19():
    assert pool_forward(np.zeros((1, 38)), 2, 2).shape[1] == 19


def test_pool_short_input_errors():
    with pytest.raises(ValueError, match="shorter than pool kernel"):
        pool_forward(np.zeros((1, 1)), 2, 2)


# ---------------------------------------------------------------------------
# LIF and readout


def test_lif_rest_state_stays_at_rest():
    state = LifState.zeros(3, quantized=False)
    params = LifParams(beta=0.7, threshold=1.0)
    new, spikes = lif_step(state, np.zeros(3), params)
    assert not spikes.any()
    assert np.all(new.membrane == 0.0)


def test_lif_subthreshold_then_spike_with_subtract_reset():
    params = LifParams(beta=0.5, threshold=1.0, reset="subtract")
    state = LifState(np.array([0.8]), np.zeros(1, dtype=np.int64))
    state, spikes = lif_step(state, np.array([0.5]), params)
    assert spikes[0] == 0
    assert state.membrane[0] == pytest.approx(0.9)
    state, spikes = lif_step(state, np.array([0.7]), params)
    assert spikes[0] == 1
    assert state.membrane[0] == pytest.approx(0.15)


def test_lif_zero_reset_clears_membrane():
    params = LifParams(beta=0.0, threshold=1.0, reset="zero")
    state = LifState(np.zeros(1), np.zeros(1, dtype=np.int64))
    state, spikes = lif_step(state, np.array([3.0]), params)
    assert spikes[0] == 1
    assert state.membrane[0] == 0.0


def test_lif_recurrence_uses_previous_spikes():
    params = LifParams(beta=0.0, threshold=0.5)
    w_in = np.eye(1)
    w_rec = np.array([[0.6]])
    state = LifState(np.zeros(1), np.array([1]))
    state, spikes = lif_step(state, np.array([0.0]), params, w_in=w_in, w_rec=w_rec)
    assert spikes[0] == 1  # driven purely by the recurrent echo


def test_lif_decays_and_never_spikes_from_subthreshold():
    params = LifParams(beta=0.8, threshold=1.0, reset="subtract")
    state = LifState(np.array([0.99]), np.zeros(1, dtype=np.int64))
    prev = state.membrane[0]
    for _ in range(50):
        state, spikes = lif_step(state, np.zeros(1), params)
        assert spikes[0] == 0
        assert state.membrane[0] == pytest.approx(prev * params.beta)
        prev = state.membrane[0]


def test_readout_zero_weights():
    u = readout_step(np.zeros(2), np.array([1.0, 0.0, 1.0]), np.zeros((2, 3)), 0.5)
    assert np.array_equal(u, np.zeros(2))


def test_readout_degenerate_identity():
    w = np.array([[1.0, 0.0], [0.0, 1.0]])
    spikes = np.array([1.0, 0.0])
    u = readout_step(np.array([9.0, 9.0]), spikes, w, beta_out=0.0)
    assert np.array_equal(u, spikes)


def test_readout_pure_integrator_holds():
    w = np.ones((2, 2))
    u = readout_step(np.zeros(2), np.ones(2), w, beta_out=1.0)
    for _ in range(5):
        u2 = readout_step(u, np.zeros(2), w, beta_out=1.0)
        assert np.array_equal(u2, u)
        u = u2


# ---------------------------------------------------------------------------
# interpolation


def test_interpolate_identity_when_factor_one():
    kp = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(interpolate_linear(kp, 1), kp)


def test_interpolate_ramp_example():
    kp = np.array([[0.0, 0.0], [4.0, 4.0]])
    out = interpolate_linear(kp, 4)
    expected = np.array(
        [[0, 0], [0, 0], [0, 0], [0, 0], [1, 1], [2, 2], [3, 3], [4, 4]], dtype=float
    )
    assert np.allclose(out, expected)
    assert np.array_equal(out[7], kp[1])  # anchor lands exactly


def test_interpolate_single_keypoint_constant():
    out = interpolate_linear(np.array([[2.5, -1.0]]), 6)
    assert out.shape == (6, 2)
    assert np.all(out == np.array([2.5, -1.0]))


def test_interpolate_exact_on_affine_signals():
    rng = np.random.default_rng(2)
    for r_int in (2, 4, 8):
        a, b = rng.normal(size=2), rng.normal(size=2)
        k = 9
        anchors = np.arange(1, k + 1) * r_int - 1
        keypoints = a[None, :] * anchors[:, None] + b[None, :]
        out = interpolate_linear(keypoints, r_int)
        idx = np.arange(k * r_int)
        expected = a[None, :] * idx[:, None] + b[None, :]
        # exact from the first anchor on; earlier samples hold the first value
        assert np.allclose(out[r_int - 1:], expected[r_int - 1:], atol=1e-12)
        assert np.all(out[: r_int - 1] == keypoints[0])


# ---------------------------------------------------------------------------
# whole-network offline inference


def test_offline_zero_input_zero_bias_gives_zero_trajectory():
    rng = np.random.default_rng(0)
    cfg = small_realtime_config()
    model = init_model(cfg, rng)
    params = dict(model.parameters)
    for name in params:
        if name.endswith(".bias"):
            params[name] = Param(np.zeros(params[name].data.shape))
    model = NetworkModel(cfg, params)
    spikes = SpikeStream(3, 4.0, np.zeros((3, 50), dtype=np.int64))
    keypoints, traj = offline_forward(model, spikes)
    assert np.all(keypoints == 0.0)
    assert np.all(traj.samples == 0.0)


def test_offline_receptive_window_gives_single_keypoint():
    rng = np.random.default_rng(1)
    model = init_model(small_realtime_config(), rng)
    spikes = random_spikes(rng, 3, 46)
    keypoints, traj = offline_forward(model, spikes)
    assert keypoints.shape == (1, 2)
    assert len(traj) == 4  # one keypoint spans r_int samples
    assert traj.step_ms == 4.0


def test_offline_rejects_channel_mismatch_and_short_input():
    rng = np.random.default_rng(2)
    model = init_model(small_realtime_config(), rng)
    with pytest.raises(ValueError, match="channels"):
        offline_forward(model, random_spikes(rng, 2, 60))
    with pytest.raises(ValueError, match="shorter than the receptive field"):
        offline_forward(model, random_spikes(rng, 3, 45))


def test_offline_rejects_mismatched_bin_width():
    rng = np.random.default_rng(2)
    model = init_model(small_realtime_config(), rng)
    with pytest.raises(ValueError, match="binned at"):
        offline_forward(model, random_spikes(rng, 3, 60, bin_ms=1.0))


def test_offline_keypoint_count_matches_plan_and_simulation():
    rng = np.random.default_rng(3)
    for _ in range(15):
        model = random_model(rng)
        cfg = model.config
        plan = compute_plan(cfg.stack_spec())
        extra = int(rng.integers(0, 3 * plan.interpolation_factor + 1))
        t = plan.receptive_field + extra
        spikes = random_spikes(rng, cfg.input_channels, t)
        keypoints, traj = offline_forward(model, spikes)
        predicted = (t - plan.receptive_field) // plan.interpolation_factor + 1
        assert keypoints.shape[0] == predicted
        assert keypoints.shape[0] == simulate_lengths(cfg.stack_spec(), t)[-1]
        assert len(traj) == keypoints.shape[0] * plan.interpolation_factor


def test_offline_deterministic_float_and_quantized():
    rng = np.random.default_rng(4)
    for quantized in (False, True):
        model = random_model(np.random.default_rng(77), quantized=quantized)
        spikes = random_spikes(rng, model.config.input_channels, 80)
        kp1, tr1 = offline_forward(model, spikes)
        kp2, tr2 = offline_forward(model, spikes)
        assert np.array_equal(kp1, kp2)
        assert np.array_equal(tr1.samples, tr2.samples)


def test_offline_record_traces_shapes():
    rng = np.random.default_rng(5)
    model = random_model(rng)
    spikes = random_spikes(rng, model.config.input_channels, 70)
    keypoints, traj, rec = offline_forward(model, spikes, record=True)
    assert len(rec.layer_inputs) == 2 * len(model.config.conv_layers)
    assert rec.keypoint_features.shape[1] == keypoints.shape[0]
    assert len(rec.lif_spikes) == len(model.config.lif_layers)
    for s, units in zip(rec.lif_spikes, model.config.lif_layers):
        assert s.shape == (keypoints.shape[0], units)
    assert rec.spike_opportunities == keypoints.shape[0] * sum(model.config.lif_layers)


def test_quantized_model_holds_only_representable_values():
    rng = np.random.default_rng(6)
    model = random_model(rng, quantized=True)
    for name, p in model.parameters.items():
        assert p.fmt == Q1_7
        assert p.data.dtype == np.int64
        assert p.data.max() <= Q1_7.raw_max and p.data.min() >= Q1_7.raw_min


def test_quantized_float_agreement_for_subthreshold_representable_model():
    # all weights are multiples of 1/16 and the LIF core never crosses
    # threshold, so the only quantization effect is the readout boundary
    # rounding of at most one Q1.4 step
    rng = np.random.default_rng(7)
    cfg = NetworkConfig(
        input_channels=2,
        conv_layers=(ConvLayerSpec(2, 3),),
        pool_layers=(PoolLayerSpec(1, 1),),
        lif_layers=(2,),
        lif_params=LifParams(beta=0.0, threshold=1.9),
        readout_beta=0.0,
        readout_mode="membrane",
    )
    params = {}
    for name, shape in cfg.param_shapes().items():
        vals = rng.integers(-2, 3, size=shape) / 16.0
        if name.endswith(".bias"):
            vals = np.zeros(shape)
        params[name] = Param(vals)
    fmodel = NetworkModel(cfg, params)
    qmodel = quantize_model(fmodel, Q1_7, Q1_4)
    spikes = SpikeStream(2, 4.0, rng.integers(0, 2, size=(2, 40)))
    kp_f, tr_f = offline_forward(fmodel, spikes)
    kp_q, tr_q = offline_forward(qmodel, spikes)
    n_samples = len(tr_f)
    bound = n_samples * Q1_4.step
    assert np.max(np.abs(kp_f - kp_q)) <= bound
    assert np.max(np.abs(tr_f.samples - tr_q.samples)) <= bound
    # the construction keeps everything exact up to the readout rounding
    assert np.max(np.abs(kp_f - kp_q)) <= Q1_4.step / 2


def test_quantized_spike_chain_propagates_at_full_weight():
    # a spike entering a deeper LIF layer must inject the weight's value,
    # identically in quantized and float arithmetic: with unit weights,
    # beta 0 and threshold 1, a layer-0 spike fires layer 1 in the same
    # step (the stack cascades within a step; only recurrence is delayed)
    cfg = NetworkConfig(
        input_channels=1,
        conv_layers=(ConvLayerSpec(1, 1),),
        pool_layers=(PoolLayerSpec(1, 1),),
        lif_layers=(1, 1),
        lif_params=LifParams(beta=0.0, threshold=1.0),
        readout_beta=0.0,
    )
    values = {name: np.zeros(shape) for name, shape in cfg.param_shapes().items()}
    values["conv0.weight"] = np.ones((1, 1, 1))
    values["lif0.input"] = np.ones((1, 1))
    values["lif1.input"] = np.ones((1, 1))
    values["readout.weight"] = np.ones((2, 1))
    fmodel = NetworkModel(cfg, {k: Param(v) for k, v in values.items()})
    qmodel = quantize_model(fmodel, Q1_7, Q1_4)
    spikes = SpikeStream(1, 4.0, np.array([[1, 0, 0, 0]]))
    for model in (fmodel, qmodel):
        _, _, rec = offline_forward(model, spikes, record=True)
        assert rec.lif_spikes[0][:, 0].tolist() == [1, 0, 0, 0]
        assert rec.lif_spikes[1][:, 0].tolist() == [1, 0, 0, 0]


# ---------------------------------------------------------------------------
# config and container validation


def test_config_rejects_non_doubling_kernels():
    with pytest.raises(ValueError, match="double"):
        small_realtime_config(conv_layers=(ConvLayerSpec(4, 9), ConvLayerSpec(4, 19)))


def test_config_rejects_overlapping_pooling():
    with pytest.raises(ValueError, match="non-overlapping"):
        small_realtime_config(pool_layers=(PoolLayerSpec(3, 2), PoolLayerSpec(2, 2)))


def test_config_rejects_conv_stride():
    with pytest.raises(ValueError, match="stride must be 1"):
        small_realtime_config(conv_layers=(ConvLayerSpec(4, 9, stride=2), ConvLayerSpec(4, 18)))


def test_config_rejects_excessive_compression():
    with pytest.raises(ValueError, match="stride product"):
        NetworkConfig(
            input_channels=2,
            conv_layers=tuple(ConvLayerSpec(2, 1 * 2 ** i) for i in range(4)),
            pool_layers=(PoolLayerSpec(2, 2),) * 4,
            lif_layers=(3,),
        )


def test_config_rejects_buffer_format_without_weight_format():
    with pytest.raises(ValueError, match="weight format"):
        small_realtime_config(buffer_format=Q1_4)


def test_spike_stream_validation():
    with pytest.raises(ValueError):
        SpikeStream(2, 4.0, np.zeros((3, 5), dtype=np.int64))
    with pytest.raises(ValueError):
        SpikeStream(2, 4.0, np.full((2, 5), -1, dtype=np.int64))
    with pytest.raises(ValueError):
        SpikeStream(2, 4.0, np.zeros((2, 5)))  # float counts


def test_trajectory_times():
    traj = Trajectory(start_ms=8.0, step_ms=4.0, samples=np.zeros((3, 2)))
    assert np.array_equal(traj.times_ms(), np.array([8.0, 12.0, 16.0]))


def test_model_shape_validation():
    rng = np.random.default_rng(8)
    cfg = small_realtime_config()
    model = init_model(cfg, rng)
    bad = dict(model.parameters)
    bad["conv0.weight"] = Param(np.zeros((1, 1, 1)))
    with pytest.raises(ValueError, match="shape"):
        NetworkModel(cfg, bad)
