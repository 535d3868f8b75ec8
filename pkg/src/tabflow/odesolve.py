"""Fixed-step Euler and RK4 plus adaptive Dormand-Prince 5(4) integration.

States are arbitrary-shape numpy arrays; the derivative callback receives
(t, state) and returns an array of the same shape. Dormand-Prince uses the
standard 7-stage tableau with the first-same-as-last evaluation reused across
accepted steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError


@dataclass(frozen=True)
class Euler:
    steps: int = 100

    def __post_init__(self):
        if self.steps < 1:
            raise NumericError("steps must be >= 1")


@dataclass(frozen=True)
class RK4:
    steps: int = 100

    def __post_init__(self):
        if self.steps < 1:
            raise NumericError("steps must be >= 1")


@dataclass(frozen=True)
class Dopri5:
    rtol: float = 1e-4
    atol: float = 1e-4
    max_steps: int = 10_000

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise NumericError("rtol and atol must be > 0")


SolverKind = Euler | RK4 | Dopri5


@dataclass
class OdeTrace:
    """Integration record. f_evals is exact: Euler = steps, RK4 = 4*steps,
    Dopri5 = 2 (initial-step probe) + 6 per accepted or rejected step."""

    final_state: np.ndarray
    accepted_steps: int
    rejected_steps: int
    f_evals: int


# Dormand-Prince 5(4) tableau
_C = (1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_ERR = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_ORDER_EXP = 0.2  # 1/5


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(x))))


class _Counted:
    def __init__(self, f):
        self.f = f
        self.evals = 0

    def __call__(self, t: float, y: np.ndarray) -> np.ndarray:
        self.evals += 1
        dy = np.asarray(self.f(t, y))
        if not np.all(np.isfinite(dy)):
            raise NumericError(f"non-finite derivative at t={t:.6g}")
        return dy


def integrate(f, state0, t_span: tuple[float, float] = (0.0, 1.0),
              solver: SolverKind = Dopri5()) -> OdeTrace:
    """Integrate dy/dt = f(t, y) over t_span and return the state at the end."""
    y = np.array(state0, copy=True)
    if not np.all(np.isfinite(y)):
        raise NumericError("initial state is not finite")
    t0, t1 = float(t_span[0]), float(t_span[1])
    cf = _Counted(f)

    if isinstance(solver, Euler):
        h = (t1 - t0) / solver.steps
        for i in range(solver.steps):
            y = y + h * cf(t0 + i * h, y)
        return OdeTrace(y, solver.steps, 0, cf.evals)

    if isinstance(solver, RK4):
        h = (t1 - t0) / solver.steps
        for i in range(solver.steps):
            t = t0 + i * h
            k1 = cf(t, y)
            k2 = cf(t + h / 2, y + (h / 2) * k1)
            k3 = cf(t + h / 2, y + (h / 2) * k2)
            k4 = cf(t + h, y + h * k3)
            y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        return OdeTrace(y, solver.steps, 0, cf.evals)

    return _dopri5(cf, y, t0, t1, solver)


def _initial_step(cf, t0, y0, f0, t1, rtol, atol) -> float:
    sc = atol + rtol * np.abs(y0)
    d0 = _rms(y0 / sc)
    d1 = _rms(f0 / sc)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, t1 - t0)
    f1 = cf(t0 + h0, y0 + h0 * f0)
    d2 = _rms((f1 - f0) / sc) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** _ORDER_EXP
    return min(100 * h0, h1, t1 - t0)


def _dopri5(cf, y, t0: float, t1: float, solver: Dopri5) -> OdeTrace:
    rtol, atol = solver.rtol, solver.atol
    t = t0
    k1 = cf(t, y)
    h = _initial_step(cf, t0, y, k1, t1, rtol, atol)
    accepted = rejected = 0
    k = [k1] + [None] * 6

    while t < t1:
        h = min(h, t1 - t)
        for i in range(6):
            yi = y + h * sum(a * k[j] for j, a in enumerate(_A[i]) if a != 0.0)
            k[i + 1] = cf(t + _C[i] * h, yi)
        y_new = y + h * sum(b * k[j] for j, b in enumerate(_B5) if b != 0.0)
        err_vec = h * sum(e * k[j] for j, e in enumerate(_ERR) if e != 0.0)
        scale_ = atol + rtol * np.maximum(np.abs(y_new), np.abs(y_new - err_vec))
        err = _rms(err_vec / scale_)

        if err <= 1.0:
            accepted += 1
            t = t1 if h >= (t1 - t) else t + h
            y = y_new
            k[0] = k[6]  # first-same-as-last
        else:
            rejected += 1
        if accepted + rejected > solver.max_steps:
            raise NumericError(f"dopri5 exceeded {solver.max_steps} steps at t={t:.6g}")
        factor = _MAX_FACTOR if err == 0.0 else _SAFETY * err ** (-_ORDER_EXP)
        h *= min(_MAX_FACTOR, max(_MIN_FACTOR, factor))

    return OdeTrace(y, accepted, rejected, cf.evals)


def convergence_order(f, state0, exact_final, kind: str = "euler",
                      base_steps: int = 64, t_span=(0.0, 1.0)) -> float:
    """Measured order: log2 of the final-error ratio between N and 2N steps."""
    solvers = {"euler": Euler, "rk4": RK4}
    try:
        make = solvers[kind]
    except KeyError:
        raise NumericError(f"unknown fixed-step solver family {kind!r}") from None
    exact = np.asarray(exact_final, dtype=np.float64)
    e1 = _rms(integrate(f, state0, t_span, make(base_steps)).final_state - exact)
    e2 = _rms(integrate(f, state0, t_span, make(2 * base_steps)).final_state - exact)
    if e2 == 0.0:
        return float("inf")
    return float(np.log2(e1 / e2))
