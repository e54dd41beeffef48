"""Test-system builders and closed-form post-switching voltage oracles.

Two models are provided:

* a two-inductor switch circuit (sources v1, v2 behind L1 and L2 meeting at
  a mid-node whose voltage u is algebraic; a resistor path to ground can be
  switched out), which admits closed-form expressions for the first
  post-switching step and is the workhorse for excursion analysis;

* a three-bus, three-phase per-unit network: ideal source behind an L
  filter, ideal source behind a series-RL line, both feeding a middle bus
  that carries a switchable fault resistance and the measurement chain.

Per-unit convention: branch reactances are given at the synchronous
frequency, so the time-domain inductance in seconds is X / omega_syn.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dae import DaeSystem, JacobianSet, SystemState, _fd_delta, eval_xddot
from .discontinuity import Event
from .errors import ModelError, ParameterError, SingularityError
from .measurement import (MeasurementParams, clarke, filter_derivative,
                          init_locked, magnitude_pre, phase_shift, pll_rates)

OMEGA_SYN = 120.0 * math.pi

# Fixed three-bus parameters (per-unit; reactances at omega_syn).
LINE_R = 0.0529
LINE_X = 0.4288
FILTER_X = 0.16
FAULT_R = 0.1
SRC_BUS2 = (1.04, 0.0)
SRC_BUS3 = (1.0131, 0.5834)
FAULT_ON_TIME = 0.2
FAULT_OFF_TIME = 0.4

SERIES_RL = "series_rl"
RESISTOR = "resistor"
SWITCH = "switch"
FAULT_TO_GROUND = "fault_to_ground"

_PHASE_OFFSETS = np.array([0.0, -2.0 * math.pi / 3.0, 2.0 * math.pi / 3.0])
_SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True, slots=True)
class Branch:
    kind: str
    from_node: str
    to_node: str
    R: float = 0.0
    L: float = 0.0  # reactance at omega_syn, per phase

    def __post_init__(self):
        if self.R < 0:
            raise ParameterError(f"branch resistance must be >= 0, got {self.R}")
        if self.kind == SERIES_RL and not (self.L > 0):
            raise ParameterError(f"series RL branch needs L > 0, got {self.L}")
        if self.kind == FAULT_TO_GROUND and not (self.R > 0):
            raise ParameterError("fault branch needs a positive resistance")


@dataclass(frozen=True, slots=True)
class AcSource:
    Vm: float
    theta: float
    node: str

    def __post_init__(self):
        if not (self.Vm > 0):
            raise ParameterError(f"source magnitude must be positive, got {self.Vm}")

    @property
    def phasor(self) -> complex:
        return self.Vm * cmath.exp(1j * self.theta)


@dataclass(frozen=True)
class Network:
    nodes: tuple[str, ...]
    branches: tuple[Branch, ...]
    sources: tuple[AcSource, ...]
    phases: int = 3
    omega_syn: float = OMEGA_SYN
    measurement: Optional[MeasurementParams] = None

    def __post_init__(self):
        reached = {"ground"} | {s.node for s in self.sources}
        frontier = set(reached)
        while frontier:
            nxt = set()
            for b in self.branches:
                if b.from_node in frontier and b.to_node not in reached:
                    nxt.add(b.to_node)
                if b.to_node in frontier and b.from_node not in reached:
                    nxt.add(b.from_node)
            reached |= nxt
            frontier = nxt
        missing = set(self.nodes) - reached
        if missing:
            raise ModelError(f"nodes unreachable from any source: {sorted(missing)}")


def ac_source_voltage(src: AcSource, t: float,
                      omega_syn: float = OMEGA_SYN) -> tuple[float, float, float]:
    """Instantaneous phase A/B/C voltages of an ideal balanced source."""
    a = omega_syn * t + src.theta
    return (src.Vm * math.cos(a),
            src.Vm * math.cos(a - 2.0 * math.pi / 3.0),
            src.Vm * math.cos(a + 2.0 * math.pi / 3.0))


# ---------------------------------------------------------------------------
# Two-inductor switch circuit
# ---------------------------------------------------------------------------

def oracle_u_bem(L1: float, L2: float, v1: float, v2: float,
                 b0: float, i_sum: float) -> float:
    """Mid-node voltage after one backward-Euler-style step, closed form.

    u = weighted source average minus (L1 L2 / (L1 + L2)) * i_sum / b0.
    The second term is the step-size-dependent excursion driven by the
    current mismatch at the switching instant.
    """
    lpar = L1 * L2 / (L1 + L2)
    return (L2 * v1 + L1 * v2) / (L1 + L2) - lpar * i_sum / b0


def oracle_u_second(L1: float, L2: float, v1: float, v2: float,
                    v1dot: float, v2dot: float, c0: float,
                    i_sum: float) -> tuple[float, float]:
    """Mid-node (u, udot) after one zero-history second-derivative step.

    u carries no excursion at all; the mismatch lands in udot scaled by
    1/c0.  c0 = 0 leaves udot undetermined.
    """
    if c0 == 0.0:
        raise SingularityError("udot is unsolvable with c0 = 0")
    lsum = L1 + L2
    u = (L2 * v1 + L1 * v2) / lsum
    udot = (L2 * v1dot + L1 * v2dot) / lsum - (L1 * L2 / lsum) * i_sum / c0
    return u, udot


def _zero_source(t: float) -> float:
    return 0.0


def build_fig1_circuit(L1: float, L2: float,
                       v1_fn: Optional[Callable[[float], float]] = None,
                       v2_fn: Optional[Callable[[float], float]] = None,
                       *, switch_r: float = 1.0, switch_closed: bool = False,
                       v1dot_fn: Optional[Callable[[float], float]] = None,
                       v2dot_fn: Optional[Callable[[float], float]] = None) -> DaeSystem:
    """Two-inductor switch circuit as a DaeSystem.

    x = (i1, i2), y = (u,).  With the switch closed the mid-node sees a
    resistor path to ground (KCL: i1 + i2 = u / switch_r), which is how a
    nonzero current mismatch arises; opening the switch replaces the
    constraint by i1 + i2 = 0.  Mutations: "open_switch", "close_switch".
    Source derivative callables may be omitted (finite differences then).
    """
    if not (L1 > 0 and L2 > 0):
        raise ParameterError(f"inductances must be positive, got {L1}, {L2}")
    if not (switch_r > 0):
        raise ParameterError(f"switch resistance must be positive, got {switch_r}")
    v1_fn = v1_fn or _zero_source
    v2_fn = v2_fn or _zero_source

    def d_dt(fn, given):
        if given is not None:
            return given
        def fd(t):
            d = _fd_delta(t)
            return (fn(t + d) - fn(t - d)) / (2 * d)
        return fd

    v1dot = d_dt(v1_fn, v1dot_fn)
    v2dot = d_dt(v2_fn, v2dot_fn)

    mode = {"closed": switch_closed}

    def f_eval(x, y, t):
        u = y[0]
        return np.array([(u - v1_fn(t)) / L1, (u - v2_fn(t)) / L2])

    def g_eval(x, y, t):
        ksum = x[0] + x[1]
        if mode["closed"]:
            ksum = ksum - y[0] / switch_r
        return np.array([ksum])

    def jac_fn(x, y, t):
        dg_dy = np.array([[-1.0 / switch_r]]) if mode["closed"] else np.zeros((1, 1))
        return JacobianSet(
            df_dx=np.zeros((2, 2)),
            df_dy=np.array([[1.0 / L1], [1.0 / L2]]),
            df_dt=np.array([-v1dot(t) / L1, -v2dot(t) / L2]),
            dg_dx=np.array([[1.0, 1.0]]),
            dg_dy=dg_dy,
            dg_dt=np.zeros(1),
        )

    def mutate_fn(action):
        if action == "open_switch":
            mode["closed"] = False
        elif action == "close_switch":
            mode["closed"] = True
        else:
            raise ModelError(f"unknown mutation {action!r}")

    return DaeSystem(
        n_diff=2, n_alg=1, f_eval=f_eval, g_eval=g_eval,
        signal_names=("i1", "i2", "u"),
        mutate_fn=mutate_fn, jac_fn=jac_fn,
        meta={"L1": L1, "L2": L2, "switch_r": switch_r, "mode": mode,
              "v1_fn": v1_fn, "v2_fn": v2_fn,
              "v1dot_fn": v1dot, "v2dot_fn": v2dot},
    )


def fig1_initial_state(sys: DaeSystem, i1: float, i2: float, t: float = 0.0,
                       second_order: bool = False) -> SystemState:
    """Consistent state for the switch circuit at given branch currents.

    With the switch closed, u = R * (i1 + i2); open, u is the weighted
    source average (consistent only when i1 + i2 = 0, which is all the
    pre-event bookkeeping a simulation needs).
    """
    m = sys.meta
    L1, L2, r = m["L1"], m["L2"], m["switch_r"]
    v1, v2 = m["v1_fn"](t), m["v2_fn"](t)
    if m["mode"]["closed"]:
        u = r * (i1 + i2)
    else:
        u = (L2 * v1 + L1 * v2) / (L1 + L2)
    x = np.array([float(i1), float(i2)])
    y = np.array([u])
    xdot = np.array([(u - v1) / L1, (u - v2) / L2])
    state = SystemState(t=t, x=x, y=y, xdot=xdot)
    if second_order:
        v1d, v2d = m["v1dot_fn"](t), m["v2dot_fn"](t)
        if m["mode"]["closed"]:
            udot = r * (xdot[0] + xdot[1])
        else:
            udot = (L2 * v1d + L1 * v2d) / (L1 + L2)
        ydot = np.array([udot])
        state.ydot = ydot
        state.xddot = eval_xddot(sys, x, y, xdot, ydot, t)
    return state


# ---------------------------------------------------------------------------
# Three-bus three-phase system
# ---------------------------------------------------------------------------

THREE_BUS_SIGNALS = (
    "i_f_a", "i_f_b", "i_f_c", "i_l_a", "i_l_b", "i_l_c",
    "pll_phi", "delta_bar", "v1m",
    "u_a", "u_b", "u_c", "v1_in", "v1_qu", "v1_d", "v1_q", "v1m_pre",
)


def build_three_bus(*, line_r: float = LINE_R, line_x: float = LINE_X,
                    filter_x: float = FILTER_X, fault_r: float = FAULT_R,
                    src_bus2: tuple[float, float] = SRC_BUS2,
                    src_bus3: tuple[float, float] = SRC_BUS3,
                    fault_times: tuple[float, float] = (FAULT_ON_TIME, FAULT_OFF_TIME),
                    measurement: Optional[MeasurementParams] = None,
                    omega_syn: float = OMEGA_SYN
                    ) -> tuple[Network, DaeSystem, list[Event]]:
    """Three-bus test system with a switchable bus fault and measurement.

    x = 6 branch currents (filter then line, phases A/B/C) + (pll_phi,
    delta_bar, v1m); y = 3 bus-1 phase voltages + (v1_in, v1_qu, v1_d,
    v1_q, v1m_pre).  Mutations: "apply_fault", "clear_fault".  Jacobians are
    analytic.  Events: fault applied then cleared at ``fault_times``.
    """
    par = measurement or MeasurementParams(omega_syn=omega_syn)
    w = omega_syn
    l_f = filter_x / w             # time-domain inductances, seconds
    l_l = line_x / w
    src2 = AcSource(src_bus2[0], src_bus2[1], "bus2")
    src3 = AcSource(src_bus3[0], src_bus3[1], "bus3")

    net = Network(
        nodes=("bus1", "bus2", "bus3"),
        branches=(
            Branch(SERIES_RL, "bus3", "bus1", R=0.0, L=filter_x),
            Branch(SERIES_RL, "bus2", "bus1", R=line_r, L=line_x),
            Branch(FAULT_TO_GROUND, "bus1", "ground", R=fault_r),
        ),
        sources=(src3, src2),
        phases=3,
        omega_syn=w,
        measurement=par,
    )

    ang3 = src3.theta + _PHASE_OFFSETS
    ang2 = src2.theta + _PHASE_OFFSETS
    vm3, vm2 = src3.Vm, src2.Vm
    mode = {"fault_g": 0.0}
    g_fault = 1.0 / fault_r
    kp, ki, t_v = par.Kp, par.Ki, par.T_V

    def f_eval(x, y, t):
        u = y[0:3]
        out = np.empty(9)
        out[0:3] = (vm3 * np.cos(w * t + ang3) - u) / l_f
        out[3:6] = (vm2 * np.cos(w * t + ang2) - u - line_r * x[3:6]) / l_l
        out[6], out[7] = pll_rates(x[6], y[6], par)
        out[8] = filter_derivative(x[8], y[7], t_v)
        return out

    def g_eval(x, y, t):
        u = y[0:3]
        cin, cqu = clarke(u[0], u[1], u[2])
        rd, rq = phase_shift(y[3], y[4], x[7])
        out = np.empty(8)
        out[0:3] = x[0:3] + x[3:6] - mode["fault_g"] * u
        out[3] = y[3] - cin
        out[4] = y[4] - cqu
        out[5] = y[5] - rd
        out[6] = y[6] - rq
        out[7] = y[7] - magnitude_pre(y[5], y[6])
        return out

    def jac_fn(x, y, t):
        delta = x[7]
        c, s = math.cos(delta), math.sin(delta)
        gf = mode["fault_g"]

        df_dx = np.zeros((9, 9))
        df_dx[3, 3] = df_dx[4, 4] = df_dx[5, 5] = -line_r / l_l
        df_dx[7, 6] = 1.0
        df_dx[8, 8] = -1.0 / t_v

        df_dy = np.zeros((9, 8))
        df_dy[0, 0] = df_dy[1, 1] = df_dy[2, 2] = -1.0 / l_f
        df_dy[3, 0] = df_dy[4, 1] = df_dy[5, 2] = -1.0 / l_l
        df_dy[6, 6] = ki
        df_dy[7, 6] = kp
        df_dy[8, 7] = 1.0 / t_v

        df_dt = np.zeros(9)
        df_dt[0:3] = -vm3 * w * np.sin(w * t + ang3) / l_f
        df_dt[3:6] = -vm2 * w * np.sin(w * t + ang2) / l_l

        dg_dx = np.zeros((8, 9))
        dg_dx[0, 0] = dg_dx[1, 1] = dg_dx[2, 2] = 1.0
        dg_dx[0, 3] = dg_dx[1, 4] = dg_dx[2, 5] = 1.0
        dg_dx[5, 7] = y[3] * s - y[4] * c
        dg_dx[6, 7] = y[3] * c + y[4] * s

        dg_dy = np.zeros((8, 8))
        dg_dy[0, 0] = dg_dy[1, 1] = dg_dy[2, 2] = -gf
        dg_dy[3, 3] = 1.0
        dg_dy[3, 0] = -2.0 / 3.0
        dg_dy[3, 1] = dg_dy[3, 2] = 1.0 / 3.0
        dg_dy[4, 4] = 1.0
        dg_dy[4, 1] = -1.0 / _SQRT3
        dg_dy[4, 2] = 1.0 / _SQRT3
        dg_dy[5, 5] = 1.0
        dg_dy[5, 3] = -c
        dg_dy[5, 4] = -s
        dg_dy[6, 6] = 1.0
        dg_dy[6, 3] = s
        dg_dy[6, 4] = -c
        dg_dy[7, 7] = 1.0
        mag = math.hypot(y[5], y[6])
        if mag > 0.0:
            dg_dy[7, 5] = -y[5] / mag
            dg_dy[7, 6] = -y[6] / mag

        return JacobianSet(df_dx, df_dy, df_dt, dg_dx, dg_dy, np.zeros(8))

    def mutate_fn(action):
        if action == "apply_fault":
            mode["fault_g"] = g_fault
        elif action == "clear_fault":
            mode["fault_g"] = 0.0
        else:
            raise ModelError(f"unknown mutation {action!r}")

    dae = DaeSystem(
        n_diff=9, n_alg=8, f_eval=f_eval, g_eval=g_eval,
        signal_names=THREE_BUS_SIGNALS,
        mutate_fn=mutate_fn, jac_fn=jac_fn,
        meta={"mode": mode, "net": net, "params": par,
              "l_f": l_f, "l_l": l_l, "line_r": line_r, "fault_r": fault_r},
    )
    events = [Event(fault_times[0], "apply_fault"),
              Event(fault_times[1], "clear_fault")]
    return net, dae, events


@dataclass(frozen=True, slots=True)
class SteadyPhasors:
    """Unfaulted phasor solution: bus voltage plus per-branch currents."""

    v1: complex
    i_filter: complex
    i_line: complex


def phasor_solution(net: Network) -> SteadyPhasors:
    """Nodal phasor solve of the unfaulted two-source divider."""
    src_nodes = {s.node: s for s in net.sources}
    buses = [n for n in net.nodes if n not in src_nodes]
    if len(buses) != 1:
        raise ModelError(f"expected a single non-source bus, got {buses}")
    bus = buses[0]

    num = 0.0 + 0.0j
    den = 0.0 + 0.0j
    z_by_node = {}
    for b in net.branches:
        ends = {b.from_node, b.to_node}
        if bus not in ends or not (ends & src_nodes.keys()):
            continue
        (src_node,) = ends & src_nodes.keys()
        z = b.R + 1j * b.L
        z_by_node[src_node] = z
        num += src_nodes[src_node].phasor / z
        den += 1.0 / z
    if len(z_by_node) != len(src_nodes) or abs(den) < 1e-12:
        raise ModelError("could not form the source-to-bus divider")
    v1 = num / den
    i_f = (src_nodes["bus3"].phasor - v1) / z_by_node["bus3"]
    i_l = (src_nodes["bus2"].phasor - v1) / z_by_node["bus2"]
    return SteadyPhasors(v1=v1, i_filter=i_f, i_line=i_l)


def _phase_values(ph: complex, wt: float) -> np.ndarray:
    rot = ph * cmath.exp(1j * wt)
    return np.array([(rot * cmath.exp(1j * off)).real for off in _PHASE_OFFSETS])


def solve_steady_state(net: Network) -> SystemState:
    """Phasor-initialized state at t = 0 with the measurement chain locked.

    Branch currents and bus voltages come from the nodal solve; the chain
    starts at the bus phasor angle so the quadrature component is zero.
    All derivative records (xdot, xddot, ydot) are filled analytically so
    second-derivative integrators can start cold.
    """
    ph = phasor_solution(net)
    par = net.measurement or MeasurementParams(omega_syn=net.omega_syn)
    w = net.omega_syn
    jw = 1j * w
    mag, ang = abs(ph.v1), cmath.phase(ph.v1)
    ms = init_locked((mag, ang), par)

    x = np.concatenate([_phase_values(ph.i_filter, 0.0),
                        _phase_values(ph.i_line, 0.0),
                        [ms.phi, ms.delta_bar, ms.V1m]])
    y = np.concatenate([_phase_values(ph.v1, 0.0),
                        [ms.v1in, ms.v1qu, ms.V1d, ms.V1q, ms.V1m_pre]])
    xdot = np.concatenate([_phase_values(jw * ph.i_filter, 0.0),
                           _phase_values(jw * ph.i_line, 0.0),
                           [0.0, w, 0.0]])
    xddot = np.concatenate([_phase_values(jw * jw * ph.i_filter, 0.0),
                            _phase_values(jw * jw * ph.i_line, 0.0),
                            [0.0, 0.0, 0.0]])
    ydot = np.concatenate([_phase_values(jw * ph.v1, 0.0),
                           [(jw * ph.v1).real, (jw * ph.v1).imag, 0.0, 0.0, 0.0]])
    return SystemState(t=0.0, x=x, y=y, xdot=xdot, xddot=xddot, ydot=ydot)


def three_bus_steady_signals(net: Network, t: float) -> np.ndarray:
    """Analytic unfaulted steady-state trajectory, ordered like the signals.

    Sinusoids for the network quantities, constants for the locked chain,
    and the cumulative angle growing at omega_syn.  Serves as the oracle for
    steady-state fidelity checks.
    """
    ph = phasor_solution(net)
    w = net.omega_syn
    wt = w * t
    mag, ang = abs(ph.v1), cmath.phase(ph.v1)
    v1_rot = ph.v1 * cmath.exp(1j * wt)
    return np.concatenate([
        _phase_values(ph.i_filter, wt),
        _phase_values(ph.i_line, wt),
        [0.0, ang + wt, mag],
        _phase_values(ph.v1, wt),
        [v1_rot.real, v1_rot.imag, mag, 0.0, mag],
    ])
