"""On-disk formats: spike files, weight files, trajectory CSV, spike CSV.

Spike file (magic ``SNNS``, little-endian):
    magic 4s | version u16 | channels u32 | timesteps u32 | bin_ms f32 |
    payload timesteps x channels u8, time-major.

Weight file (magic ``SNNW``, little-endian): a version u16 followed by
one record per parameter, in the order the network config declares them:
    name_len u16 | name UTF-8 | dtype u8 (0 = f32, 1 = fixed point) |
    [sign u8 | integer_bits u8 | fraction_bits u8, fixed point only] |
    element count u32 | payload (f32, or i32 raw mantissas).

Trajectory CSV: header ``t_ms,vx,vy``, one row per output step, t_ms
strictly increasing with a constant stride.

Spike CSV: one row per time bin, one integer column per channel.
"""

from __future__ import annotations

import csv
import struct
import warnings
from pathlib import Path

import numpy as np

from .fxp import FixedPointFormat
from .model import NetworkConfig, NetworkModel, Param, SpikeStream, Trajectory

__all__ = [
    "SPIKE_MAGIC",
    "WEIGHT_MAGIC",
    "write_spike_file",
    "read_spike_file",
    "write_weight_file",
    "write_weight_records",
    "read_weight_records",
    "read_weight_file",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "ingest_csv",
]

SPIKE_MAGIC = b"SNNS"
WEIGHT_MAGIC = b"SNNW"
FORMAT_VERSION = 1

_DTYPE_F32 = 0
_DTYPE_FXP = 1

MAX_COUNT = 255


# ---------------------------------------------------------------------------
# spike files


def write_spike_file(path, stream: SpikeStream):
    counts = stream.counts
    if counts.size and counts.max() > MAX_COUNT:
        warnings.warn(f"spike counts above {MAX_COUNT} saturate in the one-byte payload")
        counts = np.minimum(counts, MAX_COUNT)
    with open(path, "wb") as fh:
        fh.write(SPIKE_MAGIC)
        fh.write(struct.pack("<HIIf", FORMAT_VERSION, stream.channels,
                             counts.shape[1], stream.bin_ms))
        fh.write(np.ascontiguousarray(counts.T, dtype=np.uint8).tobytes())


def read_spike_file(path) -> SpikeStream:
    data = Path(path).read_bytes()
    if data[:4] != SPIKE_MAGIC:
        raise ValueError(f"{path}: not a spike file (bad magic)")
    version, channels, timesteps, bin_ms = struct.unpack_from("<HIIf", data, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported spike file version {version}")
    header = 4 + struct.calcsize("<HIIf")
    expected = timesteps * channels
    payload = np.frombuffer(data, dtype=np.uint8, count=-1, offset=header)
    if payload.size != expected:
        raise ValueError(
            f"{path}: payload holds {payload.size} counts, expected {expected}"
        )
    counts = payload.reshape(timesteps, channels).T.astype(np.int64)
    return SpikeStream(channels=channels, bin_ms=float(bin_ms), counts=counts)


# ---------------------------------------------------------------------------
# weight files


def _param_order(config: NetworkConfig):
    return list(config.param_shapes().items())


def write_weight_records(path, records):
    """Serialize (name, flat array, format or None) records in order."""
    with open(path, "wb") as fh:
        fh.write(WEIGHT_MAGIC)
        fh.write(struct.pack("<H", FORMAT_VERSION))
        for name, data, fmt in records:
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            if fmt is None:
                fh.write(struct.pack("<B", _DTYPE_F32))
                payload = np.ascontiguousarray(data, dtype="<f4")
            else:
                fh.write(struct.pack("<BBBB", _DTYPE_FXP, 1,
                                     fmt.integer_bits, fmt.fraction_bits))
                payload = np.ascontiguousarray(data, dtype="<i4")
            fh.write(struct.pack("<I", payload.size))
            fh.write(payload.tobytes())


def write_weight_file(path, model: NetworkModel):
    records = []
    for name, _ in _param_order(model.config):
        param = model.param(name)
        records.append((name, param.data, param.fmt))
    write_weight_records(path, records)


def read_weight_records(path):
    """Self-describing record list: (name, flat array, format or None)."""
    data = Path(path).read_bytes()
    if data[:4] != WEIGHT_MAGIC:
        raise ValueError(f"{path}: not a weight file (bad magic)")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported weight file version {version}")
    pos = 6
    records = []
    while pos < len(data):
        (name_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos:pos + name_len].decode("utf-8")
        pos += name_len
        (tag,) = struct.unpack_from("<B", data, pos)
        pos += 1
        fmt = None
        if tag == _DTYPE_FXP:
            sign, ibits, fbits = struct.unpack_from("<BBB", data, pos)
            pos += 3
            if sign != 1:
                raise ValueError(f"{path}: parameter {name} has a bad sign field")
            fmt = FixedPointFormat(ibits, fbits)
        elif tag != _DTYPE_F32:
            raise ValueError(f"{path}: parameter {name} has unknown dtype tag {tag}")
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        dtype = "<f4" if fmt is None else "<i4"
        nbytes = count * 4
        if pos + nbytes > len(data):
            raise ValueError(f"{path}: truncated payload for parameter {name}")
        values = np.frombuffer(data, dtype=dtype, count=count, offset=pos).copy()
        pos += nbytes
        records.append((name, values, fmt))
    return records


def read_weight_file(path, config: NetworkConfig) -> NetworkModel:
    records = {name: (values, fmt) for name, values, fmt in read_weight_records(path)}
    params = {}
    for name, shape in _param_order(config):
        if name not in records:
            raise ValueError(f"{path}: missing parameter {name}")
        values, fmt = records.pop(name)
        expected = int(np.prod(shape))
        if values.size != expected:
            raise ValueError(
                f"{path}: parameter {name} holds {values.size} values, expected {expected}"
            )
        if fmt != config.weight_format:
            raise ValueError(
                f"{path}: parameter {name} stored as "
                f"{fmt or 'f32'}, config declares {config.weight_format or 'f32'}"
            )
        data = values.reshape(shape)
        params[name] = Param(data.astype(np.float64) if fmt is None else data, fmt)
    if records:
        raise ValueError(f"{path}: unexpected parameters {sorted(records)}")
    return NetworkModel(config, params)


# ---------------------------------------------------------------------------
# trajectory CSV


def write_trajectory_csv(path, trajectory: Trajectory):
    times = trajectory.times_ms()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_ms", "vx", "vy"])
        for t, (vx, vy) in zip(times, trajectory.samples):
            writer.writerow([f"{t:.6f}", f"{vx:.9g}", f"{vy:.9g}"])


def read_trajectory_csv(path) -> Trajectory:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t_ms", "vx", "vy"]:
            raise ValueError(f"{path}: expected header t_ms,vx,vy")
        times = []
        samples = []
        for row in reader:
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}: row {reader.line_num} has {len(row)} columns")
            times.append(float(row[0]))
            samples.append((float(row[1]), float(row[2])))
    if not times:
        raise ValueError(f"{path}: no samples")
    times = np.asarray(times)
    if len(times) > 1:
        strides = np.diff(times)
        if strides.min() <= 0 or np.ptp(strides) > 1e-6:
            raise ValueError(f"{path}: t_ms must increase with a constant stride")
        step = float(strides.mean())
    else:
        step = 1.0
    return Trajectory(start_ms=float(times[0]), step_ms=step,
                      samples=np.asarray(samples))


# ---------------------------------------------------------------------------
# spike CSV ingestion


def ingest_csv(path, bin_ms: float = 4.0) -> SpikeStream:
    """One row per time bin, one integer spike count per channel.

    Ragged rows, negative counts and non-integer cells are rejected with
    the offending row/column named; counts above 255 saturate with a
    warning (matching the one-byte spike-file payload).
    """
    rows = []
    n_cols = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if n_cols is None:
                n_cols = len(row)
            elif len(row) != n_cols:
                raise ValueError(
                    f"{path}: row {reader.line_num} has {len(row)} columns, expected {n_cols}"
                )
            parsed = []
            for col, cell in enumerate(row):
                text = cell.strip()
                try:
                    value = int(text)
                except ValueError:
                    raise ValueError(
                        f"{path}: row {reader.line_num}, column {col + 1}: "
                        f"{text!r} is not an integer"
                    ) from None
                if value < 0:
                    raise ValueError(
                        f"{path}: row {reader.line_num}, column {col + 1}: "
                        f"negative count {value}"
                    )
                parsed.append(value)
            rows.append(parsed)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    counts = np.asarray(rows, dtype=np.int64).T
    if counts.max(initial=0) > MAX_COUNT:
        warnings.warn(f"spike counts above {MAX_COUNT} saturate on ingest")
        counts = np.minimum(counts, MAX_COUNT)
    return SpikeStream(channels=counts.shape[0], bin_ms=bin_ms, counts=counts)
