"""Implicit integrator coefficient families and the Newton step machinery.

First-order form (unknowns x, y at t+h):

    x_{t+h} = x_t + b0*xdot_{t+h} + bm1*xdot_t
    0       = g(x, y, t)|_{t+h}

Second-derivative form (unknowns x, y, ydot at t+h):

    x_{t+h} = x_t + b0*xdot_{t+h} + bm1*xdot_t + c0*xddot_{t+h} + cm1*xddot_t
    0       = g(x, y, t)|_{t+h}
    0       = (dg/dx * xdot + dg/dy * ydot + dg/dt)|_{t+h}

with xdot = f and xddot given by the chain rule.  Coefficient sets are plain
data so tuned families can be plugged in without code changes; the shipped
ones are backward Euler, the trapezoidal rule, and the two-derivative
Taylor / Hermite pairs derived from order conditions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dae import DaeSystem, SystemState, _fd_delta, eval_f, eval_g
from .errors import ConvergenceError, ParameterError, SolverError, UsageError

FIRST_ORDER = "first_order"
SECOND_ORDER = "second_order"


@dataclass(frozen=True, slots=True)
class IntegratorCoefficients:
    """Weights (b0, bm1) on xdot and (c0, cm1) on xddot for one step size.

    A coefficient set is *zero-history* when bm1 = cm1 = 0: the step uses no
    derivative information from the previous instant, only the persistent
    differential states, which is what makes it safe right after a
    discontinuity.
    """

    kind: str
    b0: float
    bm1: float
    c0: float
    cm1: float
    label: str = ""

    def __post_init__(self):
        if self.kind not in (FIRST_ORDER, SECOND_ORDER):
            raise ParameterError(f"unknown integrator kind {self.kind!r}")
        if self.kind == FIRST_ORDER and (self.c0 != 0.0 or self.cm1 != 0.0):
            raise ParameterError("first-order coefficients must have c0 = cm1 = 0")

    def zero_history(self) -> bool:
        return self.bm1 == 0.0 and self.cm1 == 0.0


def make_bem(h: float) -> IntegratorCoefficients:
    """Backward Euler: b0 = h, bm1 = 0."""
    _require_positive_h(h)
    return IntegratorCoefficients(FIRST_ORDER, h, 0.0, 0.0, 0.0, "bem")


def make_itm(h: float) -> IntegratorCoefficients:
    """Implicit trapezoidal: b0 = bm1 = h/2."""
    _require_positive_h(h)
    return IntegratorCoefficients(FIRST_ORDER, h / 2, h / 2, 0.0, 0.0, "itm")


def make_taylor2(h: float) -> IntegratorCoefficients:
    """Zero-history two-derivative set from the Taylor order conditions.

    b0 = h and c0 = -h^2/2 give second-order accuracy with bm1 = cm1 = 0.
    """
    _require_positive_h(h)
    return IntegratorCoefficients(SECOND_ORDER, h, 0.0, -h * h / 2, 0.0, "taylor2")


def make_obreshkov22(h: float) -> IntegratorCoefficients:
    """Two-derivative Hermite set for normal steps.

    b0 = bm1 = h/2, c0 = -h^2/12, cm1 = +h^2/12: the (2,2) Pade scheme,
    fourth-order accurate and A-stable.
    """
    _require_positive_h(h)
    c = h * h / 12
    return IntegratorCoefficients(SECOND_ORDER, h / 2, h / 2, -c, c, "obreshkov22")


def _require_positive_h(h: float) -> None:
    if not (h > 0):
        raise ParameterError(f"step size must be positive, got {h}")


@dataclass(frozen=True, slots=True)
class NewtonSettings:
    tol: float = 1e-10
    max_iter: int = 50

    def __post_init__(self):
        if not (self.tol > 0):
            raise ParameterError("newton tolerance must be positive")
        if self.max_iter < 1:
            raise ParameterError("newton max_iter must be at least 1")


def residual_first_order(coeffs: IntegratorCoefficients, sys: DaeSystem,
                         prev: SystemState, cand, t_next: float) -> np.ndarray:
    """Stacked residual (n_diff integrator rows + n_alg algebraic rows).

    ``cand`` is the candidate (x, y) at ``t_next``.  The xdot term at t+h is
    always f at the candidate; the bm1 term reads the stored prev.xdot and is
    skipped outright when bm1 = 0 so backward-Euler-style steps cannot see
    stale derivative records.
    """
    if coeffs.kind != FIRST_ORDER:
        raise UsageError("residual_first_order requires first-order coefficients")
    x, y = cand
    f = eval_f(sys, x, y, t_next)
    r_diff = x - prev.x - coeffs.b0 * f
    if coeffs.bm1 != 0.0:
        if prev.xdot is None:
            raise UsageError("coefficients with bm1 != 0 need prev.xdot")
        r_diff = r_diff - coeffs.bm1 * prev.xdot
    return np.concatenate([r_diff, eval_g(sys, x, y, t_next)])


def residual_second_order(coeffs: IntegratorCoefficients, sys: DaeSystem,
                          prev: SystemState, cand, t_next: float) -> np.ndarray:
    """Stacked residual of length n_diff + 2*n_alg.

    Rows: integrator rows with the chain-rule xddot at the candidate, then
    g = 0, then the time derivative of g (which is what determines ydot).
    ``cand`` is the candidate (x, y, ydot).
    """
    if coeffs.kind != SECOND_ORDER:
        raise UsageError("residual_second_order requires second-order coefficients")
    x, y, ydot = cand
    f = eval_f(sys, x, y, t_next)
    jac = sys.jacobians(x, y, t_next)
    xddot = jac.df_dx @ f + jac.df_dy @ ydot + jac.df_dt
    r_diff = x - prev.x - coeffs.b0 * f - coeffs.c0 * xddot
    if coeffs.bm1 != 0.0:
        if prev.xdot is None:
            raise UsageError("coefficients with bm1 != 0 need prev.xdot")
        r_diff = r_diff - coeffs.bm1 * prev.xdot
    if coeffs.cm1 != 0.0:
        if prev.xddot is None:
            raise UsageError("coefficients with cm1 != 0 need prev.xddot")
        r_diff = r_diff - coeffs.cm1 * prev.xddot
    r_g = eval_g(sys, x, y, t_next)
    r_gdot = jac.dg_dx @ f + jac.dg_dy @ ydot + jac.dg_dt
    return np.concatenate([r_diff, r_g, r_gdot])


def _inf_norm(r: np.ndarray) -> float:
    if r.size == 0:
        return 0.0
    n = float(np.max(np.abs(r)))
    return n if np.isfinite(n) else float("inf")


def _fd_jacobian(residual_fn, z: np.ndarray) -> np.ndarray:
    n = z.size
    jac = np.empty((n, n))
    for i in range(n):
        d = _fd_delta(z[i])
        zp = z.copy(); zp[i] += d
        zm = z.copy(); zm[i] -= d
        jac[:, i] = (residual_fn(zp) - residual_fn(zm)) / (2 * d)
    return jac


def newton_solve(residual_fn: Callable[[np.ndarray], np.ndarray],
                 guess: np.ndarray,
                 settings: NewtonSettings = NewtonSettings(),
                 jac: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> np.ndarray:
    """Damped Newton iteration on an arbitrary residual.

    Returns z with ||residual(z)||_inf <= settings.tol.  The update is halved
    (up to 8 times) whenever the residual norm increases.  ``jac`` may supply
    the residual Jacobian; central finite differences are used otherwise.
    On a linear residual the iteration terminates after a single update plus
    its verification evaluation.
    """
    z = np.asarray(guess, dtype=float).copy()
    r = np.asarray(residual_fn(z), dtype=float)
    norm = _inf_norm(r)
    if norm <= settings.tol:
        return z

    for _ in range(settings.max_iter):
        jmat = jac(z) if jac is not None else _fd_jacobian(residual_fn, z)
        jmat = np.asarray(jmat, dtype=float)
        if not np.all(np.isfinite(jmat)):
            raise SolverError("non-finite entries in Newton linearization")
        try:
            dz = np.linalg.solve(jmat, -r)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular Newton linearization: {exc}") from exc

        # Halve the update while it makes things worse; keep the final try.
        scale = 1.0
        for halving in range(9):
            z_try = z + scale * dz
            r_try = np.asarray(residual_fn(z_try), dtype=float)
            norm_try = _inf_norm(r_try)
            if norm_try <= norm or halving == 8:
                break
            scale *= 0.5
        z, r, norm = z_try, r_try, norm_try
        if norm <= settings.tol:
            return z

    raise ConvergenceError(
        f"newton did not converge in {settings.max_iter} iterations "
        f"(residual inf-norm {norm:.3e})",
        residual_norm=norm, iterations=settings.max_iter)


def _check_step_consistency(coeffs: IntegratorCoefficients, h: float) -> None:
    # b0 + bm1 = h is the first order condition; a mismatch means the
    # coefficients were built for a different step size.
    if abs((coeffs.b0 + coeffs.bm1) - h) > 1e-9 * max(abs(h), 1e-30):
        raise ParameterError(
            f"coefficients ({coeffs.label or coeffs.kind}) built for step "
            f"{coeffs.b0 + coeffs.bm1!r} used with step {h!r}")


def step(sys: DaeSystem, state: SystemState, coeffs: IntegratorCoefficients,
         h: float, settings: NewtonSettings = NewtonSettings(),
         t_next: Optional[float] = None) -> SystemState:
    """Advance one implicit step of size ``h`` from ``state``.

    The Newton guess is the previous step's values; for zero-history
    coefficients the ydot guess is 0 so the result is bit-identical under any
    perturbation of the stored derivative records.  ``t_next`` pins the new
    time exactly (grid bookkeeping); it defaults to ``state.t + h``.
    """
    _require_positive_h(h)
    _check_step_consistency(coeffs, h)
    t1 = state.t + h if t_next is None else t_next
    nd, na = sys.n_diff, sys.n_alg

    if coeffs.kind == FIRST_ORDER:
        stash = {}

        def residual(z):
            x, y = z[:nd], z[nd:]
            f = eval_f(sys, x, y, t1)
            stash["f"] = f
            r = x - state.x - coeffs.b0 * f
            if coeffs.bm1 != 0.0:
                r = r - coeffs.bm1 * state.xdot
            return np.concatenate([r, eval_g(sys, x, y, t1)])

        def jacobian(z):
            x, y = z[:nd], z[nd:]
            jac = sys.jacobians(x, y, t1)
            a = np.empty((nd + na, nd + na))
            a[:nd, :nd] = -coeffs.b0 * jac.df_dx
            a[:nd, :nd][np.diag_indices(nd)] += 1.0
            a[:nd, nd:] = -coeffs.b0 * jac.df_dy
            a[nd:, :nd] = jac.dg_dx
            a[nd:, nd:] = jac.dg_dy
            return a

        z = newton_solve(residual, np.concatenate([state.x, state.y]),
                         settings, jac=jacobian)
        return SystemState(t=t1, x=z[:nd].copy(), y=z[nd:].copy(),
                           xdot=stash["f"])

    # Second-derivative step: unknowns (x, y, ydot); the Newton matrix is
    # finite-differenced from the stacked residual, which is exact for linear
    # models and robust for the mildly nonlinear measurement rows.
    if coeffs.cm1 != 0.0 and state.xddot is None:
        raise UsageError("coefficients with cm1 != 0 need prev.xddot; "
                         "initialize the state with second-derivative records")
    stash = {}

    def residual(z):
        x, y, ydot = z[:nd], z[nd:nd + na], z[nd + na:]
        f = eval_f(sys, x, y, t1)
        jac = sys.jacobians(x, y, t1)
        xdd = jac.df_dx @ f + jac.df_dy @ ydot + jac.df_dt
        stash["f"], stash["xddot"] = f, xdd
        r = x - state.x - coeffs.b0 * f - coeffs.c0 * xdd
        if coeffs.bm1 != 0.0:
            r = r - coeffs.bm1 * state.xdot
        if coeffs.cm1 != 0.0:
            r = r - coeffs.cm1 * state.xddot
        rg = eval_g(sys, x, y, t1)
        rgd = jac.dg_dx @ f + jac.dg_dy @ ydot + jac.dg_dt
        return np.concatenate([r, rg, rgd])

    if coeffs.zero_history() or state.ydot is None:
        ydot_guess = np.zeros(na)
    else:
        ydot_guess = state.ydot
    z = newton_solve(residual, np.concatenate([state.x, state.y, ydot_guess]),
                     settings)
    return SystemState(t=t1, x=z[:nd].copy(), y=z[nd:nd + na].copy(),
                       xdot=stash["f"], xddot=stash["xddot"],
                       ydot=z[nd + na:].copy())
