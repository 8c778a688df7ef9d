"""Network config files: TOML, one table per concern.

Schema (all keys shown; (*) marks optional keys with their defaults):

    [network]
    input_channels = 96
    step_ms = 4.0            # (*) 4.0
    seq_len_train = 1024     # (*) training metadata, unused at inference

    [[conv]]                 # one block per conv layer, in order
    out_channels = 40
    kernel = 9
    stride = 1               # (*) 1
    pool_kernel = 2
    pool_stride = 2

    [lif]
    units = [64, 64]         # one entry per LIF layer
    beta = 0.9               # (*) 0.9
    threshold = 1.0          # (*) 1.0
    reset = "subtract"       # (*) "subtract" | "zero"

    [readout]
    units = 2                # (*) 2
    beta = 0.9               # (*) 0.9
    mode = "integrator"      # (*) "integrator" | "membrane"

    [frontend]
    activation = "none"      # (*) "none" | "relu"

    [quantization]
    weights = "float"        # (*) "float" or a sign-int-frac triple like "1-1-7"
    buffers = "float"        # (*) likewise, typically "1-1-4"
"""

from __future__ import annotations

import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .fxp import FixedPointFormat
from .model import ConvLayerSpec, LifParams, NetworkConfig, PoolLayerSpec

__all__ = ["load_network_config", "config_from_dict"]


def _format_or_none(text, where):
    if text is None or text == "float":
        return None
    try:
        return FixedPointFormat.from_spec(text)
    except (ValueError, AttributeError) as exc:
        raise ValueError(f"{where}: {exc}") from None


def config_from_dict(doc: dict, where: str = "config") -> NetworkConfig:
    try:
        network = doc["network"]
        conv_blocks = doc["conv"]
        lif = doc["lif"]
    except KeyError as exc:
        raise ValueError(f"{where}: missing section {exc.args[0]!r}") from None
    if not isinstance(conv_blocks, list) or not conv_blocks:
        raise ValueError(f"{where}: need at least one [[conv]] block")

    conv_layers = []
    pool_layers = []
    for i, block in enumerate(conv_blocks):
        try:
            conv_layers.append(ConvLayerSpec(
                out_channels=int(block["out_channels"]),
                kernel=int(block["kernel"]),
                stride=int(block.get("stride", 1)),
            ))
            pool_layers.append(PoolLayerSpec(
                kernel=int(block["pool_kernel"]),
                stride=int(block["pool_stride"]),
            ))
        except KeyError as exc:
            raise ValueError(
                f"{where}: conv block {i} is missing key {exc.args[0]!r}"
            ) from None

    readout = doc.get("readout", {})
    frontend = doc.get("frontend", {})
    quant = doc.get("quantization", {})
    try:
        return NetworkConfig(
            input_channels=int(network["input_channels"]),
            conv_layers=tuple(conv_layers),
            pool_layers=tuple(pool_layers),
            lif_layers=tuple(int(u) for u in lif["units"]),
            lif_params=LifParams(
                beta=float(lif.get("beta", 0.9)),
                threshold=float(lif.get("threshold", 1.0)),
                reset=str(lif.get("reset", "subtract")),
            ),
            readout_units=int(readout.get("units", 2)),
            readout_beta=float(readout.get("beta", 0.9)),
            readout_mode=str(readout.get("mode", "integrator")),
            conv_activation=str(frontend.get("activation", "none")),
            step_ms=float(network.get("step_ms", 4.0)),
            seq_len_train=(int(network["seq_len_train"])
                           if "seq_len_train" in network else None),
            weight_format=_format_or_none(quant.get("weights", "float"),
                                          f"{where}: quantization.weights"),
            buffer_format=_format_or_none(quant.get("buffers", "float"),
                                          f"{where}: quantization.buffers"),
        )
    except KeyError as exc:
        raise ValueError(f"{where}: missing key {exc.args[0]!r}") from None


def load_network_config(path) -> NetworkConfig:
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ValueError(f"{path}: not valid TOML: {exc}") from None
    return config_from_dict(doc, where=str(path))
