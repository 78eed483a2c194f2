"""Time-driven delay replay simulator and its accuracy evaluation.

The simulator replays an RTT trace over a virtual network path: the active
one-way delay changes once per fixed update interval (window k uses trace
value k, split between uplink and downlink), and each reconfiguration
holds the previous window's delay for a short cost at the window start.
A ping experiences the one-way delay active when it enters each direction;
there is no queueing between pings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError
from .metrics import nrmse_percentile, percentile
from .trace import RttTrace

REPORT_PERCENTILES = (25.0, 50.0, 75.0, 90.0)


@dataclass(frozen=True)
class DelayProfile:
    trace: RttTrace
    update_interval_ms: float = 500.0
    reconfig_cost_ms: float = 4.0
    uplink_fraction: float = 0.5

    def __post_init__(self):
        if self.reconfig_cost_ms < 0.0:
            raise ValueError("reconfig_cost_ms must be >= 0")
        if self.update_interval_ms <= self.reconfig_cost_ms:
            raise ValueError("update_interval_ms must exceed reconfig_cost_ms")
        if not 0.0 < self.uplink_fraction < 1.0:
            raise ValueError("uplink_fraction must lie strictly between 0 and 1")

    def active_rtt(self, t_ms: float) -> float:
        """RTT value whose delay is in force at virtual time t_ms."""
        if t_ms < 0.0:
            t_ms = 0.0
        window = int(t_ms // self.update_interval_ms)
        # Reconfiguration hold: the first reconfig_cost_ms of each window
        # still applies the previous window's delay.
        if window > 0 and t_ms < window * self.update_interval_ms + self.reconfig_cost_ms:
            window -= 1
        window = min(window, len(self.trace) - 1)
        return float(self.trace.samples[window])


@dataclass(frozen=True, eq=False)
class PingSchedule:
    """Strictly increasing send times, in ms of virtual time."""

    send_times_ms: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.send_times_ms, dtype=np.float64)
        if times.ndim != 1 or times.size == 0:
            raise ValueError("schedule must hold at least one send time")
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("send times must be strictly increasing")
        object.__setattr__(self, "send_times_ms", times)

    def __len__(self):
        return int(self.send_times_ms.size)

    @classmethod
    def periodic(
        cls, count: int = 600, interval_ms: float = 500.0, offset_ms: float | None = None
    ) -> "PingSchedule":
        """Every ``interval_ms``, ``count`` pings; default phase is mid-window
        so each ping samples exactly one delay window."""
        if count < 1:
            raise ValueError("count must be >= 1")
        if offset_ms is None:
            offset_ms = interval_ms / 2.0
        return cls(send_times_ms=offset_ms + interval_ms * np.arange(count))


def run_emulation(profile: DelayProfile, schedule: PingSchedule) -> np.ndarray:
    """Replay the trace; returns one measured RTT per scheduled ping."""
    up_frac = profile.uplink_fraction
    measured = np.empty(len(schedule))
    for idx, sent in enumerate(schedule.send_times_ms):
        up = profile.active_rtt(sent) * up_frac
        down = profile.active_rtt(sent + up) * (1.0 - up_frac)
        measured[idx] = up + down
    return measured


@dataclass
class PercentileAccuracy:
    percentile: float
    input_ms: float
    mean_emulated_ms: float
    mean_abs_delta_ms: float
    max_abs_delta_ms: float
    nrmse: float


@dataclass
class EmulationReport:
    runs: int
    rows: list[PercentileAccuracy] = field(default_factory=list)
    measured: list[np.ndarray] = field(default_factory=list)

    def to_json(self) -> str:
        payload = {
            "runs": self.runs,
            "percentiles": [
                {
                    "percentile": row.percentile,
                    "input_ms": row.input_ms,
                    "mean_emulated_ms": row.mean_emulated_ms,
                    "mean_abs_delta_ms": row.mean_abs_delta_ms,
                    "max_abs_delta_ms": row.max_abs_delta_ms,
                    "nrmse": row.nrmse,
                }
                for row in self.rows
            ],
        }
        return json.dumps(payload, indent=1) + "\n"


def evaluate_accuracy(
    input_trace: RttTrace,
    measured_runs,
    percentiles=REPORT_PERCENTILES,
) -> EmulationReport:
    """Compare measured runs against the input trace percentile by percentile."""
    runs = [np.asarray(r, dtype=np.float64) for r in measured_runs]
    if not runs:
        raise ValueError("need at least one measured run")
    real = input_trace.samples
    if float(real.std()) == 0.0:
        raise DegenerateInputError("input trace is constant; accuracy is undefined")
    report = EmulationReport(runs=len(runs), measured=runs)
    for p in percentiles:
        ref = percentile(real, p)
        values = np.asarray([percentile(run, p) for run in runs])
        deltas = np.abs(values - ref)
        report.rows.append(
            PercentileAccuracy(
                percentile=p,
                input_ms=ref,
                mean_emulated_ms=float(values.mean()),
                mean_abs_delta_ms=float(deltas.mean()),
                max_abs_delta_ms=float(deltas.max()),
                nrmse=nrmse_percentile(real, runs, p),
            )
        )
    return report
