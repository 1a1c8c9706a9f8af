"""Monotone Newton descent for discrete quartic functionals with tridiagonal Hessians.

A functional is anything exposing ``value(u)``, ``gradient(u)`` and
``hessian(u) -> (diag, off, corner)`` on the vector of free unknowns.  Steps
solve (H + lam D) d = -g with a banded Cholesky factorization; failure of
the factorization raises lam, so every accepted direction is a descent
direction.  With lam = 0 and unit steps the iteration is plain Newton and
converges quadratically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cholesky_banded, cho_solve_banded

_ARMIJO = 1e-4


def spd_tridiag_solve(diag, off, corner, rhs):
    """Solve A x = rhs for symmetric tridiagonal (or cyclic tridiagonal) A.

    Raises ``LinAlgError`` if A is not positive definite.  The cyclic case
    writes A = B - |c| w w^T with w = e_0 + e_{m-1}, B tridiagonal; A is SPD
    iff B is SPD and 1 - |c| w^T B^{-1} w > 0.
    """
    diag = np.asarray(diag, dtype=float)
    m = diag.size
    if corner == 0.0 or m < 3:
        ab = np.zeros((2, m))
        ab[0, 1:] = off
        ab[1] = diag
        c = cholesky_banded(ab, lower=False)
        return cho_solve_banded((c, False), rhs)
    if corner > 0.0:
        raise ValueError("cyclic coupling must be negative")
    a = -corner
    ab = np.zeros((2, m))
    ab[0, 1:] = off
    ab[1] = diag
    ab[1, 0] += a
    ab[1, -1] += a
    c = cholesky_banded(ab, lower=False)
    w = np.zeros(m)
    w[0] = w[-1] = 1.0
    y = cho_solve_banded((c, False), rhs)
    z = cho_solve_banded((c, False), w)
    denom = 1.0 - a * (z[0] + z[-1])
    if denom <= 1e-14:
        raise LinAlgError("cyclic matrix is not positive definite")
    return y + z * (a * (y[0] + y[-1]) / denom)


@dataclass
class NewtonTrace:
    energies: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    shifts: list = field(default_factory=list)


def newton_descent(fun, u0, *, grad_tol, max_iters, shift_scale, norm):
    """Minimize ``fun`` from ``u0``.

    ``shift_scale`` multiplies the identity in the Levenberg shift, ``norm``
    maps a gradient vector to the convergence measure.  Returns
    ``(u, converged, iterations, trace)``.
    """
    u = np.array(u0, dtype=float)
    trace = NewtonTrace()
    e = fun.value(u)
    g = fun.gradient(u)
    lam = 0.0
    it = 0
    for it in range(1, max_iters + 1):
        gn = norm(g)
        trace.energies.append(e)
        trace.grad_norms.append(gn)
        if gn <= grad_tol:
            return u, True, it - 1, trace
        diag, off, corner = fun.hessian(u)
        d = None
        while d is None:
            try:
                d = spd_tridiag_solve(diag + lam * shift_scale, off, corner, -g)
            except LinAlgError:
                lam = max(4.0 * lam, 1e-3)
                if lam > 1e12:
                    raise RuntimeError("Hessian shift diverged") from None
        trace.shifts.append(lam)
        slope = float(g @ d)
        scale = fun.magnitude(u)
        t = 1.0
        while True:
            trial = u + t * d
            e_new = fun.value(trial)
            if e_new <= e + _ARMIJO * t * slope:
                break
            # below rounding of E the quadratic model is all that is left
            if -slope < 1e-13 * scale and t == 1.0 and lam == 0.0:
                break
            t *= 0.5
            if t < 1e-12:
                return u, False, it, trace
        u = trial
        e = e_new
        g = fun.gradient(u)
        lam = 0.0 if t == 1.0 and lam < 1e-2 else lam / 4.0
    trace.energies.append(e)
    trace.grad_norms.append(norm(g))
    return u, norm(g) <= grad_tol, it, trace
