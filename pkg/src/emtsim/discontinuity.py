"""Event scheduling and post-discontinuity stepping recipes.

Three policies are shipped:

* ``cda`` -- two backward-Euler half-steps in place of the normal step
  (critical damping adjustment, the conventional approach),
* ``preliminary`` -- two zero-history second-derivative half-steps,
* ``improved`` -- one tiny backward-Euler step of size eps with ydot forced
  to zero, then two zero-history second-derivative steps of size
  (h - eps)/2.

All three consume exactly one normal step of size h; intermediate sub-step
states are recorded but flagged non-reportable so default output only ever
contains the uniform grid.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .dae import DaeSystem, SystemState, eval_xddot
from .errors import ParameterError, SchedulingError, UsageError
from .integrators import (IntegratorCoefficients, NewtonSettings, make_bem,
                          step)

CDA = "cda"
PRELIMINARY = "preliminary"
IMPROVED = "improved"


@dataclass(frozen=True, slots=True)
class Event:
    """A scheduled topology change: mutate the model by name at a fixed time."""

    time: float
    action: str

    def __post_init__(self):
        if self.time < 0:
            raise ParameterError(f"event time must be >= 0, got {self.time}")


def validate_events(events) -> tuple[Event, ...]:
    events = tuple(events)
    for a, b in zip(events, events[1:]):
        if b.time <= a.time:
            raise ParameterError(
                f"events must be sorted with distinct times ({a.time} then {b.time})")
    return events


@dataclass(frozen=True, slots=True)
class DiscontinuityPolicy:
    """Which stepping recipe to use at an event boundary.

    ``eps_fraction`` only matters for the improved recipe: the tiny first
    step has size eps = eps_fraction * h.
    """

    variant: str = IMPROVED
    eps_fraction: float = 0.01

    def __post_init__(self):
        if self.variant not in (CDA, PRELIMINARY, IMPROVED):
            raise ParameterError(f"unknown policy variant {self.variant!r}")
        if not (0.0 < self.eps_fraction < 0.5):
            raise ParameterError(
                f"eps_fraction must lie in (0, 0.5), got {self.eps_fraction}")


@dataclass(frozen=True, slots=True)
class StepRecord:
    state: SystemState
    reportable: bool


def handle_cda(sys: DaeSystem, state: SystemState, h: float,
               settings: NewtonSettings = NewtonSettings(),
               sink: Optional[list] = None) -> SystemState:
    """Two consecutive backward-Euler steps of size h/2.

    The topology mutation must already be applied.  Only the final state is
    reportable; the half-step state goes to ``sink`` flagged internal.
    """
    t0 = state.t
    half = h / 2
    s1 = step(sys, state, make_bem(half), half, settings)
    dt2 = (t0 + h) - s1.t
    s2 = step(sys, s1, make_bem(dt2), dt2, settings, t_next=t0 + h)
    if sink is not None:
        sink.append(StepRecord(s1, False))
        sink.append(StepRecord(s2, True))
    return s2


def handle_preliminary(sys: DaeSystem, state: SystemState, h: float,
                       zh: IntegratorCoefficients,
                       settings: NewtonSettings = NewtonSettings(),
                       sink: Optional[list] = None) -> SystemState:
    """Two zero-history second-derivative steps of size h/2.

    ``zh`` must be a zero-history coefficient set built for the half step.
    """
    if not zh.zero_history():
        raise UsageError("handle_preliminary needs zero-history coefficients")
    t0 = state.t
    half = h / 2
    s1 = step(sys, state, zh, half, settings)
    dt2 = (t0 + h) - s1.t
    s2 = step(sys, s1, zh, dt2, settings, t_next=t0 + h)
    if sink is not None:
        sink.append(StepRecord(s1, False))
        sink.append(StepRecord(s2, True))
    return s2


def handle_improved(sys: DaeSystem, state: SystemState, h: float,
                    policy: DiscontinuityPolicy,
                    zh_factory: Callable[[float], IntegratorCoefficients],
                    settings: NewtonSettings = NewtonSettings(),
                    sink: Optional[list] = None) -> SystemState:
    """Tiny backward-Euler step, then two zero-history half-steps.

    Step 1 has size eps = eps_fraction * h with ydot unsolvable (c0 = 0), so
    ydot is set to zero by fiat; the zero-history steps 2 and 3 never read it,
    which is what makes the artificial value harmless.  The three sub-steps
    land exactly on t + h in the time accumulator.
    """
    if policy.variant != IMPROVED:
        raise UsageError(f"handle_improved called with policy {policy.variant!r}")
    eps = policy.eps_fraction * h
    if not (0.0 < eps < h / 2):
        raise UsageError(f"eps = {eps} must lie in (0, h/2) for step {h}")
    t0 = state.t
    d = (h - eps) / 2

    s1 = step(sys, state, make_bem(eps), eps, settings)
    ydot1 = np.zeros(sys.n_alg)
    s1 = replace(s1, ydot=ydot1,
                 xddot=eval_xddot(sys, s1.x, s1.y, s1.xdot, ydot1, s1.t))

    t2 = t0 + eps + d
    dt2 = t2 - s1.t
    s2 = step(sys, s1, zh_factory(dt2), dt2, settings, t_next=t2)
    dt3 = (t0 + h) - s2.t
    s3 = step(sys, s2, zh_factory(dt3), dt3, settings, t_next=t0 + h)

    if sink is not None:
        sink.append(StepRecord(s1, False))
        sink.append(StepRecord(s2, False))
        sink.append(StepRecord(s3, True))
    return s3


def _boundary_tol(h: float) -> float:
    return 1e-6 * h


def advance(sys: DaeSystem, state: SystemState, h: float, events,
            policy: DiscontinuityPolicy,
            normal: Callable[[float], IntegratorCoefficients],
            zh_factory: Callable[[float], IntegratorCoefficients],
            settings: NewtonSettings = NewtonSettings(),
            t_next: Optional[float] = None) -> tuple[SystemState, list[StepRecord]]:
    """Advance one step boundary, dispatching to a policy at event times.

    The caller aligns the step grid so events fall on boundaries (shortening
    the step before an event if needed); an event strictly inside (t, t+h)
    raises a scheduling error.  ``normal`` builds the normal-step coefficient
    set for a given step size.  Returns the new state plus the records this
    boundary emitted (sub-steps flagged non-reportable).
    """
    events = validate_events(events)
    t0 = state.t
    t1 = t0 + h if t_next is None else t_next
    tol = _boundary_tol(h)

    fired = None
    for ev in events:
        if abs(ev.time - t0) <= tol:
            fired = ev
        elif t0 + tol < ev.time < t1 - tol:
            raise SchedulingError(
                f"event {ev.action!r} at t={ev.time} falls inside step "
                f"({t0}, {t1}); align the step grid first")

    records: list[StepRecord] = []
    if fired is None:
        s = step(sys, state, normal(h), h, settings, t_next=t1)
        records.append(StepRecord(s, True))
        return s, records

    sys.mutate(fired.action)
    if policy.variant == CDA:
        s = handle_cda(sys, state, h, settings, sink=records)
    elif policy.variant == PRELIMINARY:
        s = handle_preliminary(sys, state, h, zh_factory(h / 2),
                               settings, sink=records)
    else:
        s = handle_improved(sys, state, h, policy, zh_factory,
                            settings, sink=records)
    # The handlers pin t0 + h_eff; force the exact requested boundary so grid
    # timestamps never drift by a rounding ulp.
    if s.t != t1:
        s.t = t1
    return s, records
