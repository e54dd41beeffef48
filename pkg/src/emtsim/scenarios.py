"""Scenario configuration, run orchestration, and convergence studies.

A scenario is a fixed model + event schedule; a run advances it on a uniform
step grid (re-anchored at every event boundary so event times land exactly
on output timestamps) and records every reportable full-step state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dae import DaeSystem, SystemState, eval_f, eval_g
from .discontinuity import (DiscontinuityPolicy, Event, StepRecord, advance,
                            validate_events)
from .errors import ConvergenceError, ParameterError
from .integrators import (NewtonSettings, make_bem, make_itm,
                          make_obreshkov22, make_taylor2, step)
from .networks import (build_fig1_circuit, build_three_bus,
                       fig1_initial_state, solve_steady_state)
from .series import TimeSeries, write_csv

SCENARIOS = ("fig1", "three_bus")
METHODS = ("cda", "preliminary", "improved")
INTEGRATORS = {"itm": make_itm, "obreshkov22": make_obreshkov22,
               "bem": make_bem, "taylor2": make_taylor2}
# normal-step integrators admissible per method: the cda recipe belongs to
# first-order runs, the other two to second-derivative runs
_METHOD_INTEGRATORS = {"cda": ("itm",), "preliminary": ("obreshkov22",),
                       "improved": ("obreshkov22",)}

# Fixed parameters of the small switch-circuit scenario.
FIG1_L1 = 1.0
FIG1_L2 = 1.0
FIG1_SWITCH_R = 1.0
FIG1_I10 = 0.06
FIG1_I20 = 0.04


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything one deterministic run needs; validated on construction."""

    scenario: str
    method: str = "improved"
    integrator: str = "obreshkov22"
    step_size: float = 1e-3
    eps_fraction: float = 0.01
    t_end: float = 0.5
    output_path: Optional[str] = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ParameterError(f"unknown scenario {self.scenario!r}")
        if self.method not in METHODS:
            raise ParameterError(f"unknown method {self.method!r}")
        if self.integrator not in INTEGRATORS:
            raise ParameterError(f"unknown integrator {self.integrator!r}")
        if self.integrator not in _METHOD_INTEGRATORS[self.method]:
            raise ParameterError(
                f"method {self.method!r} pairs with "
                f"{_METHOD_INTEGRATORS[self.method]}, not {self.integrator!r}")
        if not (self.step_size > 0):
            raise ParameterError("step_size must be positive")
        if not (self.t_end > 0):
            raise ParameterError("t_end must be positive")
        if not (0.0 < self.eps_fraction < 0.5):
            raise ParameterError("eps_fraction must lie in (0, 0.5)")

    def to_file(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("[scenario]\n")
            for key in ("scenario", "method", "integrator", "step_size",
                        "eps_fraction", "t_end"):
                fh.write(f"{key} = {getattr(self, key)}\n")
            if self.output_path:
                fh.write(f"output_path = {self.output_path}\n")

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        """Parse the flat ``key = value`` format written by :meth:`to_file`."""
        fields: dict = {}
        numeric = {"step_size", "eps_fraction", "t_end"}
        with open(path, "r", encoding="utf-8") as fh:
            for lno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line or (line.startswith("[") and line.endswith("]")):
                    continue
                if "=" not in line:
                    raise ParameterError(f"{path}: line {lno}: expected key = value")
                key, _, val = line.partition("=")
                key, val = key.strip(), val.strip()
                if key in numeric:
                    try:
                        fields[key] = float(val)
                    except ValueError as exc:
                        raise ParameterError(f"{path}: line {lno}: {exc}") from exc
                elif key in ("scenario", "method", "integrator", "output_path"):
                    fields[key] = val
                else:
                    raise ParameterError(f"{path}: line {lno}: unknown key {key!r}")
        if "scenario" not in fields:
            raise ParameterError(f"{path}: missing required key 'scenario'")
        return cls(**fields)


def reference_config(t_end: float = 0.5) -> ScenarioConfig:
    """Conventional reference: trapezoidal + cda restarts at a 5 us step."""
    return ScenarioConfig(scenario="three_bus", method="cda", integrator="itm",
                          step_size=5e-6, t_end=t_end)


@dataclass
class RunDiagnostics:
    """Online consistency bookkeeping over every accepted (sub-)step."""

    n_steps: int = 0
    n_records: int = 0
    max_g_residual: float = 0.0
    max_f_deviation: float = 0.0


def segment_times(t0: float, t1: float, h: float) -> list[float]:
    """Uniform grid t0 + k*h over [t0, t1], final boundary pinned to t1.

    A trailing shortened step is appended when h does not divide the span;
    a near-integer span snaps its last point onto t1 so event boundaries
    are exact output timestamps.
    """
    if not (t1 > t0):
        raise ParameterError(f"segment must have t1 > t0, got [{t0}, {t1}]")
    if not (h > 0):
        raise ParameterError("step size must be positive")
    n_full = int(math.floor((t1 - t0) / h + 1e-9))
    times = [t0 + k * h for k in range(n_full + 1)]
    if abs(times[-1] - t1) <= 1e-6 * h:
        times[-1] = t1
    else:
        times.append(t1)
    return times


def _build_scenario(cfg: ScenarioConfig) -> tuple[DaeSystem, SystemState, list[Event]]:
    if cfg.scenario == "fig1":
        sys = build_fig1_circuit(FIG1_L1, FIG1_L2, switch_r=FIG1_SWITCH_R,
                                 switch_closed=True)
        state = fig1_initial_state(sys, FIG1_I10, FIG1_I20, t=0.0,
                                   second_order=(cfg.integrator == "obreshkov22"))
        events = [Event(0.0, "open_switch")]
        return sys, state, events
    net, sys, events = build_three_bus()
    return sys, solve_steady_state(net), events


def simulate(cfg: ScenarioConfig,
             newton: NewtonSettings = NewtonSettings(),
             on_record: Optional[Callable[[StepRecord], None]] = None
             ) -> tuple[TimeSeries, RunDiagnostics]:
    """Run a scenario to t_end, returning the reportable series + diagnostics.

    Consistency (g-residual and xdot-vs-f deviation) is accumulated online
    for every accepted state, including non-reportable sub-steps, against
    the topology active when the state was produced.
    """
    sys, state, events = _build_scenario(cfg)
    events = [e for e in validate_events(events) if e.time <= cfg.t_end]
    policy = DiscontinuityPolicy(variant=cfg.method, eps_fraction=cfg.eps_fraction)
    normal = INTEGRATORS[cfg.integrator]
    diag = RunDiagnostics()

    def note(rec: StepRecord) -> None:
        s = rec.state
        diag.n_records += 1
        g = eval_g(sys, s.x, s.y, s.t)
        if g.size:
            diag.max_g_residual = max(diag.max_g_residual, float(np.max(np.abs(g))))
        fdev = np.max(np.abs(s.xdot - eval_f(sys, s.x, s.y, s.t)))
        diag.max_f_deviation = max(diag.max_f_deviation, float(fdev))
        if on_record is not None:
            on_record(rec)

    def row_of(s: SystemState) -> np.ndarray:
        row = np.concatenate([s.x, s.y])
        if sys.derived_eval is not None:
            row = np.concatenate([row, sys.derived_eval(s)])
        return row

    times = [state.t]
    rows = [row_of(state)]
    note(StepRecord(state, True))

    boundaries = sorted({e.time for e in events if 0.0 < e.time < cfg.t_end})
    seg_edges = [0.0] + boundaries + [cfg.t_end]
    for a, b in zip(seg_edges, seg_edges[1:]):
        grid = segment_times(a, b, cfg.step_size)
        for t_next in grid[1:]:
            h = t_next - state.t
            try:
                state, records = advance(sys, state, h, events, policy,
                                         normal, make_taylor2, newton,
                                         t_next=t_next)
            except ConvergenceError as exc:
                raise ConvergenceError(
                    f"newton failed at step {diag.n_steps + 1} "
                    f"(t = {state.t:.9g} -> {t_next:.9g}): {exc}",
                    residual_norm=exc.residual_norm,
                    iterations=exc.iterations) from exc
            diag.n_steps += 1
            for rec in records:
                note(rec)
                if rec.reportable:
                    times.append(rec.state.t)
                    rows.append(row_of(rec.state))

    series = TimeSeries(names=sys.all_signal_names, times=np.array(times),
                        values=np.vstack(rows))
    return series, diag


def run_scenario(cfg: ScenarioConfig,
                 newton: NewtonSettings = NewtonSettings()) -> TimeSeries:
    """Steady-state init, event-aligned advance to t_end, optional CSV out."""
    series, _ = simulate(cfg, newton)
    if cfg.output_path:
        write_csv(series, cfg.output_path)
    return series


# ---------------------------------------------------------------------------
# Convergence studies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceStudy:
    step_sizes: tuple[float, ...]
    errors: tuple[float, ...]
    slopes: tuple[float, ...]


def _decay_problem():
    sysd = _scalar_decay_system()
    x0 = np.array([1.0])
    state = SystemState(t=0.0, x=x0, y=np.zeros(0), xdot=-x0,
                        xddot=x0.copy(), ydot=np.zeros(0))
    exact = np.array([math.exp(-1.0)])
    return sysd, state, 1.0, exact


def _scalar_decay_system() -> DaeSystem:
    def f_eval(x, y, t):
        return -x

    def g_eval(x, y, t):
        return np.zeros(0)

    return DaeSystem(n_diff=1, n_alg=0, f_eval=f_eval, g_eval=g_eval,
                     signal_names=("x",))


def _fig1_problem():
    # Smooth forced problem with a closed-form solution: consistent initial
    # currents (zero mismatch), sinusoidal sources.  i1(t) integrates
    # (v2 - v1)/(L1 + L2) exactly.
    l1 = l2 = 1.0
    sysf = build_fig1_circuit(
        l1, l2,
        v1_fn=lambda t: math.sin(t), v2_fn=lambda t: math.cos(2.0 * t),
        v1dot_fn=lambda t: math.cos(t), v2dot_fn=lambda t: -2.0 * math.sin(2.0 * t),
        switch_closed=False)
    i10 = 0.1
    state = fig1_initial_state(sysf, i10, -i10, t=0.0, second_order=True)
    t_end = 1.0
    integral = 0.5 * math.sin(2.0 * t_end) - (1.0 - math.cos(t_end))
    i1 = i10 + integral / (l1 + l2)
    exact = np.array([i1, -i10 - integral / (l1 + l2)])
    return sysf, state, t_end, exact


_CONVERGENCE_PROBLEMS = {"decay": _decay_problem, "fig1": _fig1_problem}


def convergence_study(scenario: str, integrator: str, step_sizes,
                      newton: NewtonSettings = NewtonSettings(tol=1e-13)
                      ) -> ConvergenceStudy:
    """Measure observed order by step halving against the analytic solution.

    ``scenario`` is "decay" (scalar exponential) or "fig1" (forced switch
    circuit, no events); the error is the inf-norm over differential states
    at the end time.  Step sizes must each halve the previous one; slopes
    are the log2 error ratios per refinement.
    """
    if scenario not in _CONVERGENCE_PROBLEMS:
        raise ParameterError(
            f"convergence scenario must be one of {tuple(_CONVERGENCE_PROBLEMS)}")
    if integrator not in INTEGRATORS:
        raise ParameterError(f"unknown integrator {integrator!r}")
    step_sizes = tuple(float(h) for h in step_sizes)
    if len(step_sizes) < 3:
        raise ParameterError("need at least 3 step sizes")
    for a, b in zip(step_sizes, step_sizes[1:]):
        if abs(a / b - 2.0) > 1e-9:
            raise ParameterError(
                f"each step size must halve the previous one ({a} -> {b})")

    factory = INTEGRATORS[integrator]
    errors = []
    for h in step_sizes:
        sysp, state, t_end, exact = _CONVERGENCE_PROBLEMS[scenario]()
        n = round(t_end / h)
        if abs(n * h - t_end) > 1e-9 * t_end:
            raise ParameterError(f"step {h} does not divide t_end = {t_end}")
        for k in range(1, n + 1):
            state = step(sysp, state, factory(h), h, newton,
                         t_next=k * h if k < n else t_end)
        errors.append(float(np.max(np.abs(state.x - exact))))
    slopes = tuple(math.log2(a / b) for a, b in zip(errors, errors[1:]))
    return ConvergenceStudy(step_sizes=step_sizes, errors=tuple(errors),
                            slopes=slopes)
