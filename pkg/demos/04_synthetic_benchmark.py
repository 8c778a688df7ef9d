#!/usr/bin/env python3
"""End-to-end benchmark on synthetic data.

Generates a spike stream whose channels encode a known 2-D velocity,
decodes it with an untrained and with a handcrafted decoder, and prints
accuracy plus the resource metrics (footprint, effective MAC/AC counts,
sparsity, regularization terms).  The handcrafted decoder's conv
front-end computes a moving average of the channel sum, which the
synthetic target is built to match, so it lands near R^2 = 1; the
untrained decoder shows the metrics machinery on a realistic network.
"""

import numpy as np

from snndecode.metrics import (
    align_trajectories,
    count_ops,
    r2_score,
    resource_report,
    spike_reg_term,
    weight_reg_term,
)
from snndecode.model import (
    ConvLayerSpec,
    LifParams,
    NetworkConfig,
    NetworkModel,
    Param,
    PoolLayerSpec,
    Trajectory,
    init_model,
    offline_forward,
)
from snndecode.presets import realtime_config
from snndecode.synth import SynthSpec, gen_synth


def moving_average_teacher(channels=4, kernel=8):
    cfg = NetworkConfig(
        input_channels=channels,
        conv_layers=(ConvLayerSpec(2, kernel),),
        pool_layers=(PoolLayerSpec(1, 1),),
        lif_layers=(2,),
        lif_params=LifParams(beta=0.0, threshold=1e6),
        readout_beta=0.0,
        readout_mode="membrane",
    )
    params = {name: Param(np.zeros(shape)) for name, shape in cfg.param_shapes().items()}
    w = np.zeros((2, channels, kernel))
    w[0] = 1.0 / (channels * kernel)
    w[1] = 0.5 / (channels * kernel)
    params["conv0.weight"] = Param(w)
    params["lif0.input"] = Param(np.eye(2))
    params["readout.weight"] = Param(np.eye(2))
    return NetworkModel(cfg, params)


def main():
    rng = np.random.default_rng(0)

    print("== handcrafted moving-average decoder vs its own target ==")
    teacher = moving_average_teacher()
    spikes, _ = gen_synth(SynthSpec(channels=4, duration_steps=600, seed=8))
    counts = spikes.counts.astype(float)
    window = np.convolve(counts.mean(axis=0), np.ones(8) / 8, mode="valid")
    target = Trajectory(0.0, 4.0, np.stack([window, 0.5 * window], axis=1))
    _, pred = offline_forward(teacher, spikes)
    print(f"R^2 = {r2_score(pred, target):.6f} (the target is the decoder's own "
          f"computation, so this should be 1)")

    print("\n== untrained realtime layout on a synthetic stream ==")
    config = realtime_config(input_channels=16, conv_channels=8, lif_units=(24,))
    model = init_model(config, rng, 0.4)
    spikes, truth = gen_synth(SynthSpec(channels=16, duration_steps=1200, seed=3))
    _, pred = offline_forward(model, spikes)
    pred_al, truth_al = align_trajectories(pred, truth)
    print(f"R^2 vs latent velocity: {r2_score(pred_al, truth_al):.4f} "
          f"(untrained weights, so near or below zero)")

    report = resource_report(model, spikes)
    ops = count_ops(model, spikes)
    print(f"footprint           : {report.footprint_bytes} B "
          f"({report.footprint_nonzero_bytes} B nonzero)")
    print(f"effective MACs      : {report.macs_per_inference_step:.0f}/bin, "
          f"{ops.macs_per_keypoint:.0f}/keypoint")
    print(f"effective ACs       : {report.acs_per_inference_step:.0f}/bin, "
          f"{ops.acs_per_keypoint:.0f}/keypoint")
    print(f"connection sparsity : {report.connection_sparsity:.3f}")
    print(f"activation sparsity : {report.activation_sparsity:.3f}")
    print(f"weight reg term     : {weight_reg_term(model):.3e}")
    _, _, record = offline_forward(model, spikes, record=True)
    print(f"spike reg term      : {spike_reg_term(record):.3f} "
          f"({record.total_spikes} spikes)")


if __name__ == "__main__":
    main()
