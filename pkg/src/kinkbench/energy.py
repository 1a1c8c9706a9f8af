"""Discrete energy, its derivatives, and the pointwise quartic minimizer sigma(x).

The discrete energy of a nodal field u on a uniform grid is

    E_h(u) = sum_cells (eps/2) ((u[i+1] - u[i]) / h)^2 h
           + sum_nodes w_i h ( -mu u^2 / (2 eps) + u^4 / (4 eps) - alpha f u )

with trapezoid weights w_i.  It is differentiated exactly, so the gradient,
the tridiagonal Hessian and the Euler-Lagrange residual are all consistent
with it.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np

from .profiles import LandmarkSet, Profile

BC = Literal["dirichlet_zero", "periodic", "half_line_odd"]
Symmetry = Literal["free", "odd", "periodic", "periodic_odd"]

_BC_FOR = {
    "free": "dirichlet_zero",
    "odd": "half_line_odd",
    "periodic": "periodic",
    "periodic_odd": "half_line_odd",
}

MAX_NODES = 2_000_000


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    n: int
    bc: BC = "dirichlet_zero"

    def __post_init__(self):
        if self.n < 16:
            raise ValueError("grid needs at least 16 nodes")
        if not self.x_max > self.x_min:
            raise ValueError("grid needs x_max > x_min")
        if self.bc == "half_line_odd" and self.x_min != 0.0:
            raise ValueError("half-line grids start at x = 0")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        i = np.arange(self.n, dtype=float)
        if self.x_min == -self.x_max:
            # exact mirror symmetry of the nodes about the origin
            return self.h * (i - (self.n - 1) / 2)
        return self.x_min + self.h * i

    @property
    def symmetric(self) -> bool:
        return self.x_min == -self.x_max

    def weights(self) -> np.ndarray:
        w = np.ones(self.n)
        w[0] = w[-1] = 0.5
        return w

    def free_mask(self) -> np.ndarray:
        """Nodes that are unknowns; periodic grids drop the duplicate end node."""
        m = np.ones(self.n, dtype=bool)
        m[-1] = False
        if self.bc != "periodic":
            m[0] = False
        return m


@dataclass(frozen=True)
class ProblemParams:
    epsilon: float
    alpha: float
    symmetry: Symmetry = "free"

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")
        if not self.alpha >= 0.0:
            raise ValueError("alpha must be nonnegative")
        if self.symmetry not in _BC_FOR:
            raise ValueError(f"unknown symmetry {self.symmetry!r}")

    @property
    def bc(self) -> str:
        return _BC_FOR[self.symmetry]

    @property
    def doubled(self) -> bool:
        return self.symmetry in ("odd", "periodic_odd")


@dataclass(frozen=True)
class EnergyBreakdown:
    gradient_term: float
    mu_term: float
    quartic_term: float
    forcing_term: float
    total: float

    def to_dict(self) -> dict:
        return asdict(self)


# -- grids ---------------------------------------------------------------------


def default_grid(prof: Profile, lm: LandmarkSet, p: ProblemParams, *, h=None, x_max=None,
                 n=None) -> Grid:
    """Truncated domain x_max = xi + 10 eps max(1, |ln eps|) and spacing eps/20.

    ``n`` sets the spacing from a node count instead of ``h``; symmetric and
    periodic grids round it up to the next admissible count.
    """
    eps = p.epsilon
    if n is not None:
        if h is not None:
            raise ValueError("give either h or n, not both")
        n = int(n)
        if n < 16:
            raise ValueError("grid needs at least 16 nodes")
        if prof.periodic:
            length = prof.period if p.symmetry == "periodic" else prof.period / 2
        else:
            if x_max is None:
                x_max = lm.xi + 10.0 * eps * max(1.0, abs(math.log(eps)))
            length = 2.0 * x_max if p.symmetry == "free" else x_max
        h = length / (n - 1)
    h = eps / 20.0 if h is None else float(h)
    if prof.periodic:
        T = prof.period
        length = T if p.symmetry == "periodic" else T / 2
        cells = max(int(math.ceil(length / h - 1e-9)), 15)
        if cells + 1 > MAX_NODES:
            raise ValueError("grid too fine")
        if p.symmetry == "periodic":
            if cells % 2:
                cells += 1
            return Grid(-T / 2, T / 2, cells + 1, "periodic")
        return Grid(0.0, T / 2, cells + 1, "half_line_odd")
    if x_max is None:
        x_max = lm.xi + 10.0 * eps * max(1.0, abs(math.log(eps)))
    half_cells = int(math.ceil(x_max / h - 1e-9))
    x_max = half_cells * h
    if p.symmetry == "odd":
        n = half_cells + 1
        if n > MAX_NODES:
            raise ValueError("grid too fine")
        return Grid(0.0, x_max, max(n, 16), "half_line_odd")
    n = 2 * half_cells + 1
    if n > MAX_NODES:
        raise ValueError("grid too fine")
    return Grid(-x_max, x_max, n, "dirichlet_zero")


def _check(u: np.ndarray, g: Grid) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (g.n,):
        raise ValueError(f"field has {u.shape} entries, grid has {g.n} nodes")
    return u


# -- energy -------------------------------------------------------------------


def energy(u, g: Grid, p: ProblemParams, prof: Profile) -> EnergyBreakdown:
    u = _check(u, g)
    eps, h = p.epsilon, g.h
    x = g.x
    w = g.weights() * h
    du = np.diff(u) / h
    grad = 0.5 * eps * float(np.sum(du * du)) * h
    u2 = u * u
    mu_t = float(np.sum(w * (-prof.mu(x) * u2))) / (2.0 * eps)
    quart = float(np.sum(w * u2 * u2)) / (4.0 * eps)
    forc = -p.alpha * float(np.sum(w * prof.f(x) * u))
    if p.doubled:
        grad, mu_t, quart, forc = 2 * grad, 2 * mu_t, 2 * quart, 2 * forc
    return EnergyBreakdown(grad, mu_t, quart, forc, grad + mu_t + quart + forc)


def _pointwise_grad(u, g: Grid, p: ProblemParams, prof: Profile) -> np.ndarray:
    x = g.x
    eps = p.epsilon
    return g.weights() * g.h * ((u * u - prof.mu(x)) * u / eps - p.alpha * prof.f(x))


def _stiffness_apply(u: np.ndarray, g: Grid, coef: float) -> np.ndarray:
    """Gradient of (coef/2) sum ((u[i+1]-u[i])/h)^2 h with respect to u."""
    d = np.diff(u) * (coef / g.h)
    out = np.zeros_like(u)
    out[:-1] -= d
    out[1:] += d
    return out


def energy_gradient(u, g: Grid, p: ProblemParams, prof: Profile) -> np.ndarray:
    """Exact gradient of the discrete total, projected on the constraint subspace."""
    u = _check(u, g)
    gr = _stiffness_apply(u, g, p.epsilon) + _pointwise_grad(u, g, p, prof)
    if g.bc == "periodic":
        gr[0] += gr[-1]
        gr[-1] = gr[0]
    else:
        gr[0] = gr[-1] = 0.0
    if p.doubled:
        gr *= 2.0
    return gr


def hessian_bands(u, g: Grid, p: ProblemParams, prof: Profile):
    """Diagonal and off-diagonal of the Hessian restricted to the free nodes.

    Returns ``(diag, off, corner)``; ``corner`` couples the first and last free
    node on periodic grids and is zero otherwise.
    """
    u = _check(u, g)
    eps, h = p.epsilon, g.h
    x = g.x
    c = eps / h
    pot = g.weights() * h * (3.0 * u * u - prof.mu(x)) / eps
    if g.bc == "periodic":
        m = g.n - 1
        diag = 2.0 * c + pot[:m]
        diag[0] += pot[-1]
        off = np.full(m - 1, -c)
        corner = -c
    else:
        diag = 2.0 * c + pot[1:-1]
        off = np.full(g.n - 3, -c)
        corner = 0.0
    if p.doubled:
        return 2 * diag, 2 * off, 2 * corner
    return diag, off, corner


def el_residual(u, g: Grid, p: ProblemParams, prof: Profile) -> np.ndarray:
    """eps^2 u'' + mu u - u^3 + eps alpha f at every node (pinned nodes report 0)."""
    u = _check(u, g)
    eps, h = p.epsilon, g.h
    x = g.x
    lap = np.zeros_like(u)
    if g.bc == "periodic":
        core = u[:-1]
        lap_core = (np.roll(core, 1) - 2 * core + np.roll(core, -1)) / (h * h)
        lap[:-1] = lap_core
        lap[-1] = lap_core[0]
    else:
        lap[1:-1] = (u[:-2] - 2 * u[1:-1] + u[2:]) / (h * h)
    r = eps * eps * lap + prof.mu(x) * u - u**3 + eps * p.alpha * prof.f(x)
    if g.bc != "periodic":
        r[0] = r[-1] = 0.0
    return r


# -- sigma --------------------------------------------------------------------


def _quartic(y, mu, c):
    # normalized quartic P(y) = y^4 - 2 mu y^2 - 4 c y with c = eps alpha f
    y2 = y * y
    return y2 * y2 - 2.0 * mu * y2 - 4.0 * c * y


def solve_sigma(mu, c):
    """Global minimizer of P(y) = y^4 - 2 mu y^2 - 4 c y, vectorized.

    Roots of the depressed cubic y^3 - mu y - c = 0 via Cardano (one real root)
    or the trigonometric form (three real roots), each polished by one Newton
    step, then the root with the least P wins.
    """
    mu = np.asarray(mu, dtype=float)
    c = np.asarray(c, dtype=float)
    mu, c = np.broadcast_arrays(mu, c)
    shape = mu.shape
    mu = mu.ravel().copy()
    c = c.ravel().copy()
    p_ = -mu
    q = -c
    disc = (q / 2.0) ** 2 + (p_ / 3.0) ** 3
    roots = np.full((3, mu.size), np.nan)

    one = disc > 0
    if np.any(one):
        sq = np.sqrt(disc[one])
        qh = q[one] / 2.0
        # pick the cancellation-free branch
        s = np.where(qh >= 0.0, -1.0, 1.0)
        a = np.cbrt(-qh + s * sq)
        pp = p_[one]
        with np.errstate(divide="ignore", invalid="ignore"):
            b = np.where(a != 0.0, -pp / (3.0 * a), 0.0)
        roots[0, one] = a + b

    three = ~one
    if np.any(three):
        pp = p_[three]
        qq = q[three]
        r = np.sqrt(np.maximum(-pp / 3.0, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            arg = np.where(r > 0.0, (-qq / 2.0) / (r**3), 0.0)
        theta = np.arccos(np.clip(arg, -1.0, 1.0)) / 3.0
        for k in range(3):
            roots[k, three] = 2.0 * r * np.cos(theta - 2.0 * math.pi * k / 3.0)

    # one Newton polish on P'(y)/4 = y^3 - mu y - c
    fr = roots**3 - mu * roots - c
    dfr = 3.0 * roots**2 - mu
    # near a double root the step can blow up; such polishes are rejected below
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        step = np.where(np.abs(dfr) > 1e-300, fr / dfr, 0.0)
        polished = roots - step
        fr_new = np.abs(polished**3 - mu * polished - c)
    roots = np.where(fr_new <= np.abs(fr), polished, roots)

    vals = _quartic(roots, mu, c)
    vals = np.where(np.isnan(vals), np.inf, vals)
    best = np.argmin(vals, axis=0)
    sigma = roots[best, np.arange(mu.size)]

    # f = 0: symmetric quartic; tie broken to +sqrt(mu), or 0 when mu <= 0
    flat = c == 0.0
    sigma = np.where(flat & (mu > 0.0), np.sqrt(np.maximum(mu, 0.0)), sigma)
    sigma = np.where(flat & (mu <= 0.0), 0.0, sigma)
    pmin = np.minimum(_quartic(sigma, mu, c), 0.0)
    return sigma.reshape(shape), pmin.reshape(shape)


def sigma_at(x, p: ProblemParams, prof: Profile):
    """(sigma(x), P_x(sigma(x))) for P_x(y) = y^4 - 2 mu(x) y^2 - 4 eps alpha f(x) y."""
    x = np.asarray(x, dtype=float)
    return solve_sigma(prof.mu(x), p.epsilon * p.alpha * prof.f(x))


def sigma_table(g: Grid, p: ProblemParams, prof: Profile):
    return sigma_at(g.x, p, prof)


def renormalized_energy(u, g: Grid, p: ProblemParams, prof: Profile) -> float:
    """E(u) plus the integral of -P_x(sigma(x)) / (4 eps).

    The 1/(4 eps) converts the y^4 - 2 mu y^2 - 4 eps alpha f y normalization
    of P_x back to the energy density.  Nonnegative for every field.
    """
    u = _check(u, g)
    e = energy(u, g, p, prof).total
    _, pmin = sigma_table(g, p, prof)
    add = -float(np.sum(g.weights() * g.h * pmin)) / (4.0 * p.epsilon)
    if p.doubled:
        add *= 2.0
    return e + add


def pohozaev_residual(u, g: Grid, p: ProblemParams, prof: Profile) -> float:
    """|E(u) - int(-u^4/(4 eps) - alpha f u / 2)| / (1 + |E(u)|)."""
    u = _check(u, g)
    e = energy(u, g, p, prof).total
    w = g.weights() * g.h
    ident = float(np.sum(w * (-(u**4) / (4.0 * p.epsilon) - 0.5 * p.alpha * prof.f(g.x) * u)))
    if p.doubled:
        ident *= 2.0
    return abs(e - ident) / (1.0 + abs(e))
