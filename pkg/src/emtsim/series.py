"""Recorded signal series, CSV round-tripping, and reference comparison."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CsvFormatError, DimensionError, UsageError, WindowError


@dataclass(frozen=True)
class TimeSeries:
    """Reportable records of one run: strictly increasing times, one row each."""

    names: tuple[str, ...]
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.ndim != 2 or self.values.shape != (self.times.size, len(self.names)):
            raise DimensionError(
                f"values shape {self.values.shape} does not match "
                f"{self.times.size} times x {len(self.names)} signals")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise DimensionError("record times must be strictly increasing")

    def __len__(self) -> int:
        return int(self.times.size)

    def column(self, name: str) -> np.ndarray:
        if name not in self.names:
            raise UsageError(f"signal {name!r} not in series {self.names}")
        return self.values[:, self.names.index(name)]


def write_csv(series: TimeSeries, path) -> None:
    """Write header ``time_s,<names...>`` plus one row per record.

    Floats are emitted with shortest round-trip representation, so reading
    the file back reproduces every value bit for bit.
    """
    for name in series.names:
        if "," in name or "\n" in name:
            raise UsageError(f"signal name {name!r} cannot be stored in CSV")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(("time_s",) + tuple(series.names)) + "\n")
        for t, row in zip(series.times, series.values):
            fh.write(repr(float(t)))
            for v in row:
                fh.write(",")
                fh.write(repr(float(v)))
            fh.write("\n")


def read_csv(path) -> TimeSeries:
    """Inverse of :func:`write_csv`; parse errors carry the line number."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CsvFormatError(f"{path}: empty file", line_no=0)
    header = lines[0].split(",")
    if header[0] != "time_s":
        raise CsvFormatError(f"{path}: header must start with time_s", line_no=1)
    names = tuple(header[1:])
    ncol = len(header)

    times, rows = [], []
    for lno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != ncol:
            raise CsvFormatError(
                f"{path}: line {lno} has {len(parts)} fields, expected {ncol}",
                line_no=lno)
        try:
            vals = [float(p) for p in parts]
        except ValueError as exc:
            raise CsvFormatError(f"{path}: line {lno}: {exc}", line_no=lno) from exc
        times.append(vals[0])
        rows.append(vals[1:])
    values = np.array(rows, dtype=float).reshape(len(times), len(names))
    return TimeSeries(names=names, times=np.array(times), values=values)


@dataclass(frozen=True, slots=True)
class SignalError:
    max_abs: float
    rms: float


@dataclass(frozen=True)
class ComparisonReport:
    """Per-signal error metrics of a run against a reference over a window."""

    window: tuple[float, float]
    errors: dict[str, SignalError] = field(default_factory=dict)

    def __getitem__(self, signal: str) -> SignalError:
        return self.errors[signal]


def compare(run: TimeSeries, reference: TimeSeries, signal=None,
            window: tuple[float, float] = None) -> ComparisonReport:
    """Interpolate the reference onto the run's timestamps and report errors.

    ``signal`` may be one name or None for every signal present in both
    series.  The reference is expected to be sampled at least as finely as
    the run; interpolation is linear.
    """
    if window is None:
        raise UsageError("compare requires an explicit (t0, t1) window")
    t0, t1 = window
    if not (t0 < t1):
        raise WindowError(f"window must satisfy t0 < t1, got {window}")
    lo = max(run.times[0], reference.times[0])
    hi = min(run.times[-1], reference.times[-1])
    if t0 < lo - 1e-12 or t1 > hi + 1e-12:
        raise WindowError(
            f"window {window} outside the common span ({lo}, {hi})")

    if signal is None:
        signals = [n for n in run.names if n in reference.names]
        if not signals:
            raise UsageError("series share no signals")
    else:
        signals = [signal]

    mask = (run.times >= t0) & (run.times <= t1)
    ts = run.times[mask]
    report = {}
    for name in signals:
        a = run.column(name)[mask]
        b = np.interp(ts, reference.times, reference.column(name))
        diff = a - b
        report[name] = SignalError(
            max_abs=float(np.max(np.abs(diff))) if diff.size else 0.0,
            rms=float(np.sqrt(np.mean(diff ** 2))) if diff.size else 0.0)
    return ComparisonReport(window=(t0, t1), errors=report)
