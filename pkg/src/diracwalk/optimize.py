"""Box-constrained Levenberg-Marquardt for small least-squares problems.

Used by both the noise-model calibration and the oscillation fit.  The
Jacobian is taken by forward differences unless supplied.  Trial points
are projected onto the box; a step is accepted only if it lowers the
objective, so the recorded history is strictly decreasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass
class LeastSquaresResult:
    x: np.ndarray
    residuals: np.ndarray
    jacobian: np.ndarray
    cost: float  # sum of squared residuals
    iterations: int
    evaluations: int
    converged: bool
    message: str
    history: list[float] = field(default_factory=list)


def numerical_jacobian(fun, x, f0, lower, upper, rel_step=1e-7):
    jac = np.empty((f0.size, x.size))
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        # step away from an active bound
        if x[i] + h > upper[i]:
            h = -h
        xp = x.copy()
        xp[i] += h
        jac[:, i] = (fun(xp) - f0) / h
    return jac


def levenberg_marquardt(
    fun: Callable[[np.ndarray], np.ndarray],
    x0,
    lower=None,
    upper=None,
    jac: Callable[[np.ndarray], np.ndarray] | None = None,
    max_iter: int = 500,
    gtol: float = 1e-10,
    xtol: float = 1e-12,
    ftol: float = 1e-15,
    damping: float = 1e-3,
) -> LeastSquaresResult:
    """Minimize ``sum(fun(x)**2)`` subject to ``lower <= x <= upper``.

    Stops when the projected gradient norm falls below ``gtol``, the step
    or relative cost change becomes negligible, or after ``max_iter``
    iterations (``converged`` is then False and the best point is returned).
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    lower = np.full(x.size, -np.inf) if lower is None else np.asarray(lower, np.float64)
    upper = np.full(x.size, np.inf) if upper is None else np.asarray(upper, np.float64)
    x = np.clip(x, lower, upper)

    def jacobian(xk, fk):
        return jac(xk) if jac is not None else numerical_jacobian(fun, xk, fk, lower, upper)

    f = fun(x)
    evals = 1
    cost = float(f @ f)
    history = [cost]
    lam = damping
    converged, message = False, "iteration budget exhausted"
    J = jacobian(x, f)
    evals += x.size if jac is None else 0
    it = 0
    for it in range(1, max_iter + 1):
        g = J.T @ f
        # gradient components pushing against an active bound do not count
        free = ~(((x <= lower) & (g > 0)) | ((x >= upper) & (g < 0)))
        if np.linalg.norm(g[free]) < gtol or cost == 0.0:
            converged, message = True, "gradient norm below tolerance"
            break
        # variables held at a bound by the gradient stay fixed this iteration
        Jf = J[:, free]
        A = Jf.T @ Jf
        diag = np.diag(A).copy()
        diag[diag == 0] = 1.0
        improved = False
        while lam < 1e16:
            try:
                step_free = np.linalg.solve(A + lam * np.diag(diag), -g[free])
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            step = np.zeros_like(x)
            step[free] = step_free
            x_new = np.clip(x + step, lower, upper)
            f_new = fun(x_new)
            evals += 1
            cost_new = float(f_new @ f_new)
            if cost_new < cost:
                improved = True
                break
            lam *= 10
        if not improved:
            converged, message = True, "no further decrease possible"
            break
        dx = np.linalg.norm(x_new - x)
        rel = (cost - cost_new) / max(cost, 1e-300)
        x, f, cost = x_new, f_new, cost_new
        history.append(cost)
        lam = max(lam / 10, 1e-12)
        if dx <= xtol * (xtol + np.linalg.norm(x)) or rel < ftol:
            converged, message = True, "step or cost change below tolerance"
            J = jacobian(x, f)
            break
        J = jacobian(x, f)
        evals += x.size if jac is None else 0
    return LeastSquaresResult(x, f, J, cost, it, evals, converged, message, history)
