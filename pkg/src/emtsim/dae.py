"""Semi-explicit DAE representation and derivative machinery.

A system is

    xdot = f(x, y, t)
    0    = g(x, y, t)

with differential states ``x`` and algebraic states ``y``.  Everything the
integrators need -- evaluators, Jacobian blocks, the chain-rule second
derivative of x -- lives here.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError, ModelError

# Central-difference perturbation: relative to the entry with a floor at the
# per-unit scale 1.0.  Keeps subtractive cancellation near 1e-11 for function
# values up to O(10), which is what lets linear systems reproduce their
# constant coefficient matrices to <= 1e-9; central differencing leaves
# quadratics exact regardless.
FD_REL = 1e-5


@dataclass(slots=True)
class SystemState:
    """Solution snapshot at one time instant.

    ``xddot`` and ``ydot`` are carried only while a second-derivative
    integrator is active; first-order runs leave them as None.
    """

    t: float
    x: np.ndarray
    y: np.ndarray
    xdot: np.ndarray
    xddot: Optional[np.ndarray] = None
    ydot: Optional[np.ndarray] = None

    def copy(self) -> "SystemState":
        return SystemState(
            t=self.t,
            x=self.x.copy(),
            y=self.y.copy(),
            xdot=self.xdot.copy(),
            xddot=None if self.xddot is None else self.xddot.copy(),
            ydot=None if self.ydot is None else self.ydot.copy(),
        )

    def with_time(self, t: float) -> "SystemState":
        return replace(self, t=t)


@dataclass(slots=True)
class JacobianSet:
    """Partial derivatives of f and g at one evaluation point."""

    df_dx: np.ndarray
    df_dy: np.ndarray
    df_dt: np.ndarray
    dg_dx: np.ndarray
    dg_dy: np.ndarray
    dg_dt: np.ndarray


@dataclass
class DaeSystem:
    """Evaluators plus topology-mutation hooks for one model.

    ``f_eval(x, y, t)`` returns xdot (length ``n_diff``);
    ``g_eval(x, y, t)`` returns the algebraic residual (length ``n_alg``).
    ``mutate_fn(action)`` applies a named topology change (switch, fault).
    Mutations may change f/g behaviour but never the state dimensions:
    differential states persist across discontinuities.

    ``jac_fn`` optionally supplies analytic Jacobians; models without it
    fall back to finite differences (:func:`estimate_jacobians`).
    """

    n_diff: int
    n_alg: int
    f_eval: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    g_eval: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    signal_names: tuple[str, ...] = ()
    mutate_fn: Optional[Callable[[str], None]] = None
    jac_fn: Optional[Callable[[np.ndarray, np.ndarray, float], JacobianSet]] = None
    derived_names: tuple[str, ...] = ()
    derived_eval: Optional[Callable[[SystemState], np.ndarray]] = None
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.n_diff < 0 or self.n_alg < 0:
            raise DimensionError("state dimensions must be non-negative")
        if not self.signal_names:
            self.signal_names = tuple(
                [f"x{i}" for i in range(self.n_diff)]
                + [f"y{i}" for i in range(self.n_alg)]
            )
        if len(self.signal_names) != self.n_diff + self.n_alg:
            raise DimensionError(
                f"signal_names has {len(self.signal_names)} entries, "
                f"expected n_diff + n_alg = {self.n_diff + self.n_alg}"
            )

    @property
    def all_signal_names(self) -> tuple[str, ...]:
        return self.signal_names + self.derived_names

    def mutate(self, action: str) -> None:
        if self.mutate_fn is None:
            raise ModelError(f"model has no topology mutations (requested {action!r})")
        self.mutate_fn(action)

    def jacobians(self, x: np.ndarray, y: np.ndarray, t: float) -> JacobianSet:
        if self.jac_fn is not None:
            return self.jac_fn(x, y, t)
        return estimate_jacobians(self, x, y, t)


def _check_len(name: str, vec: np.ndarray, expected: int) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (expected,):
        raise DimensionError(f"{name} has shape {vec.shape}, expected ({expected},)")
    return vec


def eval_f(sys: DaeSystem, x: np.ndarray, y: np.ndarray, t: float) -> np.ndarray:
    """Evaluate xdot = f(x, y, t) with dimension checks on input and output."""
    x = _check_len("x", x, sys.n_diff)
    y = _check_len("y", y, sys.n_alg)
    out = np.asarray(sys.f_eval(x, y, t), dtype=float)
    return _check_len("f(x, y, t)", out, sys.n_diff)


def eval_g(sys: DaeSystem, x: np.ndarray, y: np.ndarray, t: float) -> np.ndarray:
    """Evaluate the algebraic residual g(x, y, t); zero at consistent points."""
    x = _check_len("x", x, sys.n_diff)
    y = _check_len("y", y, sys.n_alg)
    out = np.asarray(sys.g_eval(x, y, t), dtype=float)
    return _check_len("g(x, y, t)", out, sys.n_alg)


def _fd_delta(v: float) -> float:
    return FD_REL * max(abs(v), 1.0)


def estimate_jacobians(sys: DaeSystem, x, y, t: float) -> JacobianSet:
    """Central finite-difference Jacobians of f and g.

    Exact for linear systems up to rounding; a perturbation floor keeps zero
    entries well-conditioned.  Models with ``jac_fn`` bypass this entirely.
    """
    x = _check_len("x", x, sys.n_diff)
    y = _check_len("y", y, sys.n_alg)
    nd, na = sys.n_diff, sys.n_alg

    df_dx = np.zeros((nd, nd))
    dg_dx = np.zeros((na, nd))
    for i in range(nd):
        d = _fd_delta(x[i])
        xp = x.copy(); xp[i] += d
        xm = x.copy(); xm[i] -= d
        df_dx[:, i] = (sys.f_eval(xp, y, t) - sys.f_eval(xm, y, t)) / (2 * d)
        dg_dx[:, i] = (sys.g_eval(xp, y, t) - sys.g_eval(xm, y, t)) / (2 * d)

    df_dy = np.zeros((nd, na))
    dg_dy = np.zeros((na, na))
    for i in range(na):
        d = _fd_delta(y[i])
        yp = y.copy(); yp[i] += d
        ym = y.copy(); ym[i] -= d
        df_dy[:, i] = (sys.f_eval(x, yp, t) - sys.f_eval(x, ym, t)) / (2 * d)
        dg_dy[:, i] = (sys.g_eval(x, yp, t) - sys.g_eval(x, ym, t)) / (2 * d)

    dt = _fd_delta(t)
    df_dt = (np.asarray(sys.f_eval(x, y, t + dt)) - sys.f_eval(x, y, t - dt)) / (2 * dt)
    dg_dt = (np.asarray(sys.g_eval(x, y, t + dt)) - sys.g_eval(x, y, t - dt)) / (2 * dt)

    return JacobianSet(df_dx, df_dy, np.asarray(df_dt, dtype=float).reshape(nd),
                       dg_dx, dg_dy, np.asarray(dg_dt, dtype=float).reshape(na))


def eval_xddot(sys: DaeSystem, x, y, xdot, ydot, t: float) -> np.ndarray:
    """Second derivative of x by the chain rule,

        xddot = df/dx * xdot + df/dy * ydot + df/dt,

    using the model's Jacobians (analytic when available).
    """
    x = _check_len("x", x, sys.n_diff)
    y = _check_len("y", y, sys.n_alg)
    xdot = _check_len("xdot", xdot, sys.n_diff)
    if ydot is None:
        ydot = np.zeros(sys.n_alg)
    ydot = _check_len("ydot", ydot, sys.n_alg)
    jac = sys.jacobians(x, y, t)
    return jac.df_dx @ xdot + jac.df_dy @ ydot + jac.df_dt
