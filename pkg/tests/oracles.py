"""Independent reference computations (mpmath, dense linear algebra, brute force).

Nothing here imports the package; the tests freeze the numbers these produce.
"""

import mpmath as mp
import numpy as np
import scipy.linalg

mp.mp.dps = 40


def donut(chi):
    mu = lambda x: x**4 * mp.e ** (-x**2) - chi
    return mu, lambda x: -mp.diff(mu, x) / 2


def double_gaussian(a, chi):
    mu = lambda x: mp.e ** (-(x - a) ** 2) + mp.e ** (-(x + a) ** 2) - chi
    return mu, lambda x: -mp.diff(mu, x) / 2


def donut_landmarks(chi):
    mu, _ = donut(chi)
    zeta = mp.sqrt(2)
    xi = mp.findroot(mu, (zeta, 6), solver="bisect")
    xi_p = mp.findroot(mu, (mp.mpf("1e-9"), zeta), solver="bisect")
    return {"zeta": zeta, "xi": xi, "xi_prime": xi_p, "mu_zeta": mu(zeta), "mu_0": mu(0)}


def double_gaussian_landmarks(a, chi):
    mu, _ = double_gaussian(a, chi)
    dmu = lambda x: mp.diff(mu, x)
    zeta = mp.findroot(dmu, (mp.mpf("0.5"), a + 1), solver="bisect")
    xi = mp.findroot(mu, (zeta, a + 10), solver="bisect")
    return {"zeta": zeta, "xi": xi, "mu_zeta": mu(zeta), "mu_0": mu(0)}


def k_integral(mu, f, pieces):
    """2 * integral over x > 0 of |f| sqrt(mu) on {mu > 0}, pieces bracketing it."""
    g = lambda x: abs(f(x)) * mp.sqrt(mu(x)) if mu(x) > 0 else mp.mpf(0)
    return 2 * mp.quad(g, pieces)


def alpha_double_star(mz, m0):
    return mp.sqrt(2) * (mz**1.5 + m0**1.5) / (mz**1.5 - m0**1.5)


def alpha_odd(mz, m0):
    return mp.sqrt(2) * mz**1.5 / (mz**1.5 - m0**1.5)


def sigma_bruteforce(mu, c, lo=-3.0, hi=3.0, step=1e-3):
    """Grid minimum of y^4 - 2 mu y^2 - 4 c y (a lower-resolution upper bound on the true min)."""
    y = np.arange(lo, hi + step / 2, step)
    vals = y**4 - 2 * mu * y**2 - 4 * c * y
    return float(np.min(vals))


def energy_loop(u, x, eps, alpha, mu, f):
    """Discrete energy by explicit loops (trapezoid nodes, forward-difference cells)."""
    n = len(u)
    h = x[1] - x[0]
    e = 0.0
    for i in range(n - 1):
        d = (u[i + 1] - u[i]) / h
        e += 0.5 * eps * d * d * h
    for i in range(n):
        w = 0.5 if i in (0, n - 1) else 1.0
        e += w * h * (-mu(x[i]) * u[i] ** 2 / (2 * eps) + u[i] ** 4 / (4 * eps) - alpha * f(x[i]) * u[i])
    return e


def top_generalized_eig(mu_vals, h):
    """Dense solve of diag(mu h) phi = lambda K phi, K the Dirichlet stiffness."""
    n = mu_vals.size
    M = np.diag(mu_vals * h)
    K = (np.diag(np.full(n, 2.0 / h)) + np.diag(np.full(n - 1, -1.0 / h), 1)
         + np.diag(np.full(n - 1, -1.0 / h), -1))
    return float(scipy.linalg.eigh(M, K, eigvals_only=True)[-1])
