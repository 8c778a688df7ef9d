#!/usr/bin/env python3
"""Fixed-point formats in action.

Weights live in Q1.7 (sign + 1 integer + 7 fraction bits), streaming
buffers in Q1.4.  This script shows the value grid, rounding and
saturation behavior, exact multiply-accumulate with one rounding, and
what quantization does to a model's memory footprint.
"""

import numpy as np

from snndecode.fxp import (
    Q1_4,
    Q1_7,
    FxpValue,
    SaturationCounter,
    dequantize,
    fxp_mul_acc,
    quantize,
)
from snndecode.metrics import footprint
from snndecode.model import init_model, quantize_model
from snndecode.presets import realtime_config


def main():
    print(f"Q1.7: step {Q1_7.step}, range [{Q1_7.min_value}, {Q1_7.max_value}], "
          f"{Q1_7.total_bits} bits")
    print(f"Q1.4: step {Q1_4.step}, range [{Q1_4.min_value}, {Q1_4.max_value}], "
          f"{Q1_4.total_bits} bits")

    print("\nrounding (ties away from zero) and saturation:")
    for x in (0.1, -0.1, 0.5 / 128, 1.9999, 3.0, -3.0):
        q = quantize(x, Q1_7)
        print(f"  quantize({x:>8}) -> raw {q.raw:>5}  value {q.value}")

    counter = SaturationCounter()
    acc = quantize(1.9, Q1_7, counter)
    one = quantize(1.0, Q1_7, counter)
    out = fxp_mul_acc(acc, one, one, counter)
    print(f"\nsaturating MAC: 1.8984375 + 1.0*1.0 -> {out.value} "
          f"(clipped at the Q1.7 maximum; {counter.count} saturation)")

    a = FxpValue(13, Q1_7)  # 0.1015625
    exact = (13 / 128) ** 2
    out = fxp_mul_acc(FxpValue(0, Q1_7), a, a)
    print(f"small product: {a.value}^2 = {exact:.10f} -> {out.value} "
          f"(one rounding, not one per partial sum)")

    print("\nround-trip error bound (half a step):")
    rng = np.random.default_rng(0)
    xs = rng.uniform(Q1_4.min_value, Q1_4.max_value, 20000)
    errs = [abs(dequantize(quantize(x, Q1_4)) - x) for x in xs[:2000]]
    print(f"  max |x - roundtrip(x)| = {max(errs):.6f} <= {Q1_4.step / 2}")

    print("\nfootprint of the realtime layout, float vs quantized:")
    fmodel = init_model(realtime_config(), rng, 0.3)
    qmodel = quantize_model(fmodel, Q1_7, Q1_4)
    for label, model in (("float32", fmodel), ("Q1.7/Q1.4", qmodel)):
        rep = footprint(model)
        print(f"  {label:<10} params {rep.param_bytes:>8} B   "
              f"buffers {rep.buffer_bytes:>7} B   total {rep.total_bytes:>8} B")
    saved = 1 - footprint(qmodel).total_bytes / footprint(fmodel).total_bytes
    print(f"  quantization shrinks the footprint by {100 * saved:.0f}%")


if __name__ == "__main__":
    main()
