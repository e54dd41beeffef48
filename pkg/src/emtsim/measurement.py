"""Bus-voltage measurement and synchronization chain.

Three-phase voltages pass through a Clarke transform into orthogonal
in-phase/quadrature components, a rotation by the tracked cumulative angle
into the device frame, a synchronous-reference-frame PLL driving the
quadrature component to zero, and a low-pass filter on the phasor magnitude.
The chain contributes three differential states (PLL integrator, cumulative
angle, filtered magnitude) and five algebraic states to the global DAE of
any model that embeds it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dae import DaeSystem, SystemState
from .errors import ParameterError

OMEGA_SYN = 120.0 * math.pi

_K23 = 2.0 / 3.0
_SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True, slots=True)
class MeasurementParams:
    """PLL gains, magnitude-filter time constant, synchronous frequency.

    The PI gains give a well-damped lock around 3-4 Hz bandwidth, fast
    against a 0.2 s observation window; the 20 ms filter smooths switching
    transients without hiding them at that time scale.
    """

    Kp: float = 50.0
    Ki: float = 500.0
    T_V: float = 0.02
    omega_syn: float = OMEGA_SYN

    def __post_init__(self):
        if not (self.Kp > 0 and self.Ki > 0 and self.T_V > 0):
            raise ParameterError("Kp, Ki and T_V must all be positive")


@dataclass(slots=True)
class MeasurementState:
    """Chain state: differential (phi, delta_bar, V1m), algebraic (rest)."""

    phi: float
    delta_bar: float
    V1m: float
    v1in: float
    v1qu: float
    V1d: float
    V1q: float
    V1m_pre: float


def clarke(vA: float, vB: float, vC: float) -> tuple[float, float]:
    """In-phase and quadrature components of a three-phase set.

    Rows sum to zero, so any common offset on the three phases is rejected.
    """
    v_in = _K23 * (vA - 0.5 * vB - 0.5 * vC)
    v_qu = _K23 * (_SQRT3 / 2.0) * (vB - vC)
    return v_in, v_qu


def phase_shift(v1in: float, v1qu: float, delta_bar: float) -> tuple[float, float]:
    """Rotate (v1in, v1qu) by -delta_bar into the device frame."""
    c, s = math.cos(delta_bar), math.sin(delta_bar)
    return v1in * c + v1qu * s, -v1in * s + v1qu * c


def pll_rates(phi: float, v1q: float, params: MeasurementParams) -> tuple[float, float]:
    """PI loop on the quadrature component plus synchronous feed-forward.

    Returns (dphi/dt, ddelta_bar/dt).  In lock (v1q = 0, phi = 0) the
    cumulative angle advances at exactly omega_syn.
    """
    dphi = params.Ki * v1q
    ddelta = params.omega_syn + params.Kp * v1q + phi
    return dphi, ddelta


def pll_derivatives(st: MeasurementState, params: MeasurementParams,
                    V1q: float) -> tuple[float, float]:
    return pll_rates(st.phi, V1q, params)


def magnitude_pre(V1d: float, V1q: float) -> float:
    return math.hypot(V1d, V1q)


def filter_derivative(V1m: float, V1m_pre: float, T_V: float) -> float:
    """First-order lag: dV1m/dt = (V1m_pre - V1m) / T_V."""
    if not (T_V > 0):
        raise ParameterError(f"filter time constant must be positive, got {T_V}")
    return (-V1m + V1m_pre) / T_V


def init_locked(bus1_phasor: tuple[float, float],
                params: MeasurementParams) -> MeasurementState:
    """Locked steady-state chain values for a given bus phasor (mag, angle).

    delta_bar starts at the phasor angle so V1q = 0 by construction; the
    magnitude filter starts settled.
    """
    mag, ang = bus1_phasor
    return MeasurementState(
        phi=0.0,
        delta_bar=ang,
        V1m=mag,
        v1in=mag * math.cos(ang),
        v1qu=mag * math.sin(ang),
        V1d=mag,
        V1q=0.0,
        V1m_pre=mag,
    )


def build_measurement_bench(Vm: float, theta: float,
                            params: MeasurementParams = MeasurementParams()
                            ) -> tuple[DaeSystem, SystemState]:
    """Stand-alone chain driven by an ideal balanced source, for testing.

    x = (phi, delta_bar, V1m); y = (v1in, v1qu, V1d, V1q, V1m_pre).
    Jacobians are left to finite differences.
    """
    w = params.omega_syn

    def phase_voltages(t):
        a = w * t + theta
        return (Vm * math.cos(a),
                Vm * math.cos(a - 2.0 * math.pi / 3.0),
                Vm * math.cos(a + 2.0 * math.pi / 3.0))

    def f_eval(x, y, t):
        phi, _delta, v1m = x
        dphi, ddelta = pll_rates(phi, y[3], params)
        return np.array([dphi, ddelta, filter_derivative(v1m, y[4], params.T_V)])

    def g_eval(x, y, t):
        _phi, delta, _v1m = x
        v1in, v1qu, v1d, v1q, v1m_pre = y
        cin, cqu = clarke(*phase_voltages(t))
        rd, rq = phase_shift(v1in, v1qu, delta)
        return np.array([
            v1in - cin,
            v1qu - cqu,
            v1d - rd,
            v1q - rq,
            v1m_pre - magnitude_pre(v1d, v1q),
        ])

    sys = DaeSystem(
        n_diff=3, n_alg=5, f_eval=f_eval, g_eval=g_eval,
        signal_names=("pll_phi", "delta_bar", "v1m",
                      "v1_in", "v1_qu", "v1_d", "v1_q", "v1m_pre"),
        meta={"Vm": Vm, "theta": theta, "params": params},
    )

    ms = init_locked((Vm, theta), params)
    x0 = np.array([ms.phi, ms.delta_bar, ms.V1m])
    y0 = np.array([ms.v1in, ms.v1qu, ms.V1d, ms.V1q, ms.V1m_pre])
    xdot0 = f_eval(x0, y0, 0.0)
    state = SystemState(t=0.0, x=x0, y=y0, xdot=xdot0)
    return sys, state
