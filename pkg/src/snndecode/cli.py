"""Command-line front door.

Subcommands:

* ``analyze``      buffer plan, latency, execution rate, realtime verdict
* ``run-offline``  whole-sequence inference to a trajectory CSV
* ``run-stream``   incremental inference, optional equivalence report
* ``gen-synth``    synthetic spike file plus ground-truth trajectory
* ``bench``        resource report and R^2 per input file
* ``quantize``     rewrite a float weight file in fixed-point formats

Every error exits nonzero with a one-line diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bufcalc import compute_plan, realtime_check
from .config import load_network_config
from .formats import (
    ingest_csv,
    read_spike_file,
    read_weight_file,
    read_weight_records,
    read_trajectory_csv,
    write_spike_file,
    write_trajectory_csv,
    write_weight_records,
)
from .fxp import FixedPointFormat, quantize_array
from .metrics import align_trajectories, r2_score, resource_report, score_summary
from .model import offline_forward
from .stream import equivalence_report, run_stream
from .synth import SynthSpec, gen_synth

__all__ = ["main"]


def _load_spikes(path, bin_ms):
    path = Path(path)
    if path.suffix == ".snns":
        return read_spike_file(path)
    if path.suffix == ".csv":
        return ingest_csv(path, bin_ms=bin_ms)
    raise ValueError(f"{path}: unknown spike input extension (expected .snns or .csv)")


def _load_model(config_path, weights_path):
    config = load_network_config(config_path)
    return read_weight_file(weights_path, config)


def _plan_document(config):
    plan = compute_plan(config.stack_spec())
    verdict = realtime_check(plan)
    layers = []
    for i, kind in enumerate(plan.layer_kinds()):
        if kind == "conv":
            kernel = config.conv_layers[i // 2].kernel
            stride = config.conv_layers[i // 2].stride
        else:
            kernel = config.pool_layers[i // 2].kernel
            stride = config.pool_layers[i // 2].stride
        layers.append({
            "index": i,
            "kind": kind,
            "kernel": kernel,
            "stride": stride,
            "buffer_keypoint": plan.b_keypoints[i],
            "buffer_new_data": plan.b_new_data[i],
            "buffer_new_data_update": plan.b_new_data_update[i],
        })
    return plan, verdict, {
        "receptive_field": plan.receptive_field,
        "interpolation_factor": plan.interpolation_factor,
        "latency_steps": plan.latency_steps,
        "latency_ms": plan.latency_ms,
        "execution_rate_hz": plan.execution_rate_hz,
        "step_ms": config.step_ms,
        "realtime_capable": verdict.capable,
        "reasons": list(verdict.reasons),
        "layers": layers,
    }


def _cmd_analyze(args):
    config = load_network_config(args.config)
    plan, verdict, doc = _plan_document(config)
    print(f"receptive field      {plan.receptive_field} bins")
    print(f"interpolation factor {plan.interpolation_factor}")
    print(f"latency              {plan.latency_steps} steps = {plan.latency_ms:g} ms")
    print(f"execution rate       {plan.execution_rate_hz:g} Hz")
    print()
    print(f"{'layer':<10}{'kernel':>8}{'stride':>8}{'keypoint':>10}"
          f"{'new data':>10}{'update':>8}")
    for layer in doc["layers"]:
        print(f"{layer['kind'] + str(layer['index'] // 2):<10}{layer['kernel']:>8}"
              f"{layer['stride']:>8}{layer['buffer_keypoint']:>10}"
              f"{layer['buffer_new_data']:>10}{layer['buffer_new_data_update']:>8}")
    print()
    print(f"verdict: {'realtime-capable' if verdict.capable else 'not realtime-capable'}")
    for reason in verdict.reasons:
        print(f"  - {reason}")
    if args.json:
        Path(args.json).write_text(json.dumps(doc, indent=2) + "\n")
        print(f"wrote {args.json}")
    return 0


def _cmd_run_offline(args):
    model = _load_model(args.config, args.weights)
    spikes = _load_spikes(args.input, args.bin_ms)
    _, trajectory = offline_forward(model, spikes)
    write_trajectory_csv(args.output, trajectory)
    print(f"wrote {args.output} ({len(trajectory)} samples)")
    return 0


def _cmd_run_stream(args):
    model = _load_model(args.config, args.weights)
    spikes = _load_spikes(args.input, args.bin_ms)
    trajectory, events, timing = run_stream(
        model, spikes, emit_zero_during_warmup=args.warmup_zero
    )
    write_trajectory_csv(args.output, trajectory)
    n_keypoints = sum(e.kind == "keypoint" for e in events)
    print(f"wrote {args.output} ({len(trajectory)} samples, {n_keypoints} keypoints)")
    print(
        f"push latency us: p50 {timing.p50_us:.1f}  p90 {timing.p90_us:.1f}  "
        f"p99 {timing.p99_us:.1f}  max {timing.max_us:.1f}",
        file=sys.stderr,
    )
    if args.report_equivalence:
        report = equivalence_report(model, spikes)
        print(f"equivalence: {report.summary()}")
        print(f"max difference vs offline: {report.max_abs_diff_samples:g}")
    return 0


def _cmd_gen_synth(args):
    spec = SynthSpec(
        channels=args.channels,
        duration_steps=args.steps,
        rate_scale=args.rate_scale,
        smoothness=args.smoothness,
        seed=args.seed,
        bin_ms=args.bin_ms,
    )
    stream, truth = gen_synth(spec)
    write_spike_file(args.out, stream)
    print(f"wrote {args.out} ({stream.channels} channels x {stream.num_bins} bins)")
    if args.truth:
        write_trajectory_csv(args.truth, truth)
        print(f"wrote {args.truth}")
    return 0


def _cmd_bench(args):
    model = _load_model(args.config, args.weights)
    rows = []
    for input_path in args.inputs:
        spikes = _load_spikes(input_path, args.bin_ms)
        report = resource_report(model, spikes)
        r2 = None
        if args.target:
            _, pred = offline_forward(model, spikes)
            target = read_trajectory_csv(args.target)
            pred_al, target_al = align_trajectories(pred, target)
            r2 = r2_score(pred_al, target_al)
        rows.append((str(input_path), report, r2))

    print(f"{'input':<28}{'R^2':>8}{'foot B':>10}{'nz B':>10}"
          f"{'MAC/step':>12}{'AC/step':>12}{'conn sp':>9}{'act sp':>9}")
    for name, rep, r2 in rows:
        r2_text = f"{r2:.4f}" if r2 is not None else "-"
        print(f"{Path(name).name:<28}{r2_text:>8}{rep.footprint_bytes:>10}"
              f"{rep.footprint_nonzero_bytes:>10}{rep.macs_per_inference_step:>12.1f}"
              f"{rep.acs_per_inference_step:>12.1f}{rep.connection_sparsity:>9.3f}"
              f"{rep.activation_sparsity:>9.3f}")
    scores = [r2 for _, _, r2 in rows if r2 is not None]
    if len(scores) > 1:
        mean, sdm = score_summary(scores)
        print(f"\nmean R^2 {mean:.4f} +- {sdm:.4f} (standard deviation of the mean)")
    if args.json:
        doc = [
            {
                "input": name,
                "r2": r2,
                "footprint_bytes": rep.footprint_bytes,
                "footprint_nonzero_bytes": rep.footprint_nonzero_bytes,
                "macs_per_inference_step": rep.macs_per_inference_step,
                "acs_per_inference_step": rep.acs_per_inference_step,
                "connection_sparsity": rep.connection_sparsity,
                "activation_sparsity": rep.activation_sparsity,
            }
            for name, rep, r2 in rows
        ]
        Path(args.json).write_text(json.dumps(doc, indent=2) + "\n")
        print(f"wrote {args.json}")
    return 0


def _cmd_quantize(args):
    weight_fmt = FixedPointFormat.from_spec(args.weight_format)
    records = read_weight_records(args.weights)
    quantized = []
    for name, values, fmt in records:
        if fmt is not None:
            raise ValueError(f"{args.weights}: {name} is already fixed point ({fmt})")
        quantized.append((name, quantize_array(values.astype(np.float64), weight_fmt),
                          weight_fmt))
    write_weight_records(args.out, quantized)
    before = -(-sum(32 * v.size for _, v, _ in records) // 8)
    after = -(-sum(weight_fmt.total_bits * raw.size for _, raw, _ in quantized) // 8)
    print(f"wrote {args.out}")
    print(f"parameter footprint: {before} B -> {after} B "
          f"({100.0 * (1 - after / before):.1f}% smaller)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snndecode",
        description="Streaming spiking-network decoder: analysis, inference, benchmarks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="buffer plan and realtime verdict for a config")
    p.add_argument("--config", required=True)
    p.add_argument("--json", help="also write the plan as a JSON document")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("run-offline", help="whole-sequence inference")
    p.add_argument("--config", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--input", required=True, help="spike file (.snns) or CSV")
    p.add_argument("--output", required=True, help="trajectory CSV to write")
    p.add_argument("--bin-ms", type=float, default=4.0, help="bin width for CSV input")
    p.set_defaults(func=_cmd_run_offline)

    p = sub.add_parser("run-stream", help="incremental inference, bin by bin")
    p.add_argument("--config", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--input", required=True, help="spike file (.snns) or CSV")
    p.add_argument("--output", required=True, help="trajectory CSV to write")
    p.add_argument("--bin-ms", type=float, default=4.0, help="bin width for CSV input")
    p.add_argument("--report-equivalence", action="store_true",
                   help="also run offline and report the maximum difference")
    p.add_argument("--warmup-zero", action="store_true",
                   help="emit zero-velocity warmup events before the first keypoint")
    p.set_defaults(func=_cmd_run_stream)

    p = sub.add_parser("gen-synth", help="synthetic spike stream + ground truth")
    p.add_argument("--channels", type=int, default=96)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--rate-scale", type=float, default=1.0)
    p.add_argument("--smoothness", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bin-ms", type=float, default=4.0)
    p.add_argument("--out", required=True, help="spike file to write (.snns)")
    p.add_argument("--truth", help="ground-truth trajectory CSV to write")
    p.set_defaults(func=_cmd_gen_synth)

    p = sub.add_parser("bench", help="resource report and R^2 per input file")
    p.add_argument("--config", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--target", help="ground-truth trajectory CSV for R^2")
    p.add_argument("--bin-ms", type=float, default=4.0)
    p.add_argument("--json", help="also write the report as a JSON document")
    p.add_argument("inputs", nargs="+", help="spike files (.snns) or CSVs")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("quantize", help="rewrite a float weight file in fixed point")
    p.add_argument("--weights", required=True, help="float weight file to read")
    p.add_argument("--out", required=True, help="fixed-point weight file to write")
    p.add_argument("--weight-format", default="1-1-7",
                   help="sign-int-frac triple, default 1-1-7")
    p.set_defaults(func=_cmd_quantize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
