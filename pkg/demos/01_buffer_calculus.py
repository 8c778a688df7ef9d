#!/usr/bin/env python3
"""Walk through the streaming buffer calculus.

For a temporal conv/pool stack we derive, layer by layer: the window
each layer must hold to produce one keypoint, the number of fresh
entries it needs before the next keypoint, and the window it actually
processes per update.  From those fall out the model's latency and
execution rate, and with them the realtime verdict.
"""

from snndecode.bufcalc import (
    compute_plan,
    doubling_stack,
    latency_vs_kernel_sweep,
    realtime_check,
)


def describe(name, first_kernel, layers):
    spec = doubling_stack(first_kernel, layers)
    plan = compute_plan(spec)
    verdict = realtime_check(plan)
    print(f"== {name}: kernels {list(spec.conv_kernels)}, pool 2/2 x{layers} ==")
    print(f"receptive field     : {plan.receptive_field} bins "
          f"({plan.receptive_field * spec.step_ms:g} ms of context)")
    print(f"interpolation factor: {plan.interpolation_factor} "
          f"(one keypoint per {plan.interpolation_factor} bins)")
    print(f"latency             : {plan.latency_steps} steps = {plan.latency_ms:g} ms")
    print(f"execution rate      : {plan.execution_rate_hz:g} Hz")
    print(f"{'layer':<8}{'keypoint buf':>14}{'new-data buf':>14}{'update quota':>14}")
    for i, kind in enumerate(plan.layer_kinds()):
        print(f"{kind}{i // 2:<7}{plan.b_keypoints[i]:>14}{plan.b_new_data[i]:>14}"
              f"{plan.b_new_data_update[i]:>14}")
    print(f"verdict: {'realtime-capable' if verdict.capable else 'NOT realtime-capable'}")
    for reason in verdict.reasons:
        print(f"  - {reason}")
    print()


def main():
    describe("realtime layout", first_kernel=9, layers=2)
    describe("benchmark layout", first_kernel=31, layers=3)

    print("== receptive field / latency versus first kernel size ==")
    print(f"{'k':>4} | {'2 layers':>22} | {'3 layers':>22}")
    rows2 = dict((k, (r, ms)) for k, r, ms in
                 latency_vs_kernel_sweep(range(1, 34), num_layers=2))
    rows3 = dict((k, (r, ms)) for k, r, ms in
                 latency_vs_kernel_sweep(range(1, 34), num_layers=3))
    for k in (1, 3, 5, 9, 13, 17, 21, 25, 31, 33):
        r2, ms2 = rows2[k]
        r3, ms3 = rows3[k]
        mark2 = "*" if ms2 <= 100 else " "
        mark3 = "*" if ms3 <= 100 else " "
        print(f"{k:>4} | R={r2:>5}  {ms2:>7.0f} ms {mark2} | R={r3:>5}  {ms3:>7.0f} ms {mark3}")
    print("(* = within the 100 ms latency budget)")
    print()
    largest2 = max(k for k, (_, ms) in rows2.items() if ms <= 100)
    print(f"largest 2-layer first kernel inside the budget: {largest2} "
          f"-> kernels {largest2}/{2 * largest2}")


if __name__ == "__main__":
    main()
