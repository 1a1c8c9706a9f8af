"""Multi-start Newton descent on the discrete energy.

Every start runs the monotone Newton iteration of :mod:`kinkbench.newton` on
the free nodes only, so boundary pins, the periodic identification and (on
half-line grids) oddness hold exactly at every iterate.  The global solvers
run every admissible seed of the catalog and keep the least energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .energy import (
    EnergyBreakdown,
    Grid,
    ProblemParams,
    el_residual,
    energy,
    pohozaev_residual,
    renormalized_energy,
)
from .newton import newton_descent
from .profiles import LandmarkSet, Profile
from .testfunctions import SEED_IDS, seed_catalog
from .zeros import find_zeros

TIE_TOL = 1e-9

CATALOG_NOTE = ("global optimality is certified relative to the seed catalog only; "
                "a lower critical point outside its basins cannot be excluded")


class SolveError(RuntimeError):
    def __init__(self, message, diagnostics=()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


@dataclass(frozen=True)
class SolveConfig:
    grad_tol: Optional[float] = None
    max_iters: int = 500
    seeds: Optional[tuple] = None

    def __post_init__(self):
        if self.grad_tol is not None and not self.grad_tol > 0.0:
            raise ValueError("grad_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.seeds is not None:
            unknown = [s for s in self.seeds if s.lstrip("-^") not in SEED_IDS]
            if unknown:
                raise ValueError(f"unknown seed ids {unknown}")
            object.__setattr__(self, "seeds", tuple(self.seeds))

    def tol(self, eps: float) -> float:
        # the potential carries 1/eps, so the default tolerance does too
        return self.grad_tol if self.grad_tol is not None else 1e-8 / eps


class QuarticFunctional:
    """F(u) = k * [ (stiff/2) sum (du/h)^2 h + sum w h (-m u^2/2 + q u^4/4 - c u) ].

    Evaluated on the free entries of a nodal vector; ``base`` supplies the
    pinned values.  On periodic grids the last node mirrors the first.
    """

    def __init__(self, h, stiff, m, q, c, w, free, *, periodic=False, factor=1.0, base=None):
        self.h = float(h)
        self.stiff = float(stiff)
        self.m = np.asarray(m, dtype=float)
        self.q = float(q)
        self.c = np.asarray(c, dtype=float)
        self.wh = np.asarray(w, dtype=float) * self.h
        self.free = np.asarray(free, dtype=bool)
        self.periodic = periodic
        self.factor = float(factor)
        n = self.free.size
        self.base = np.zeros(n) if base is None else np.asarray(base, dtype=float).copy()
        wf = self.wh[self.free].copy()
        if periodic:
            wf[0] += self.wh[-1]
        self.w_free = wf * self.factor

    def full(self, v):
        u = self.base.copy()
        u[self.free] = v
        if self.periodic:
            u[-1] = u[0]
        return u

    def restrict(self, u):
        return np.asarray(u, dtype=float)[self.free].copy()

    def _terms(self, u):
        du = np.diff(u)
        u2 = u * u
        grad = 0.5 * self.stiff / self.h * float(du @ du)
        pot = float(self.wh @ (-0.5 * self.m * u2 + 0.25 * self.q * u2 * u2 - self.c * u))
        return grad, pot

    def value(self, v):
        grad, pot = self._terms(self.full(v))
        return self.factor * (grad + pot)

    def magnitude(self, v):
        u = self.full(v)
        du = np.diff(u)
        u2 = u * u
        s = 0.5 * self.stiff / self.h * float(du @ du)
        s += float(self.wh @ (0.5 * np.abs(self.m) * u2 + 0.25 * self.q * u2 * u2 + np.abs(self.c * u)))
        return self.factor * s

    def gradient(self, v):
        u = self.full(v)
        d = np.diff(u) * (self.stiff / self.h)
        gr = np.zeros_like(u)
        gr[:-1] -= d
        gr[1:] += d
        gr += self.wh * ((self.q * u * u - self.m) * u - self.c)
        if self.periodic:
            gr[0] += gr[-1]
        return self.factor * gr[self.free]

    def hessian(self, v):
        u = self.full(v)
        k = self.stiff / self.h
        pot = self.wh * (3.0 * self.q * u * u - self.m)
        if self.periodic:
            diag = 2.0 * k + pot[:-1]
            diag[0] += pot[-1]
            corner = -k
        else:
            diag = 2.0 * k + pot[self.free]
            corner = 0.0
        off = np.full(diag.size - 1, -k)
        f = self.factor
        return f * diag, f * off, f * corner

    def norm(self, gv):
        """Root-mean-square of the nodal functional derivative."""
        r = gv / self.w_free
        return float(math.sqrt(float(r @ r) / r.size))

    def shift_scale(self):
        return self.w_free


def energy_functional(g: Grid, p: ProblemParams, prof: Profile) -> QuarticFunctional:
    x = g.x
    eps = p.epsilon
    return QuarticFunctional(
        g.h, eps, prof.mu(x) / eps, 1.0 / eps, p.alpha * prof.f(x), g.weights(),
        g.free_mask(), periodic=g.bc == "periodic", factor=2.0 if p.doubled else 1.0,
    )


# -- results ------------------------------------------------------------------


@dataclass
class SolveResult:
    field: np.ndarray
    grid: Grid
    params: ProblemParams
    breakdown: EnergyBreakdown
    renorm: float
    grad_norm: float
    el_residual_max: float
    pohozaev: float
    iterations: int
    winning_seed: str
    canonical: bool
    converged: bool
    grad_tol: float
    energies: list = field(default_factory=list, repr=False)
    diagnostics: list = field(default_factory=list, repr=False)
    note: str = CATALOG_NOTE

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def energy(self) -> float:
        return self.breakdown.total

    def full_line(self):
        """(x, u) with half-line odd fields unfolded to the symmetric domain."""
        x, u = self.grid.x, self.field
        if self.grid.bc != "half_line_odd":
            return x, u
        return np.concatenate([-x[:0:-1], x]), np.concatenate([-u[:0:-1], u])

    @property
    def wraps(self) -> bool:
        """True when the unfolded field is one full period."""
        return self.grid.bc == "periodic" or self.params.symmetry == "periodic_odd"

    def zeros(self):
        x, u = self.full_line()
        return find_zeros(u, x, periodic=self.wraps)

    def scalars(self) -> dict:
        return {
            "epsilon": self.params.epsilon,
            "alpha": self.params.alpha,
            "symmetry": self.params.symmetry,
            "grid": {"x_min": self.grid.x_min, "x_max": self.grid.x_max, "n": self.grid.n,
                     "bc": self.grid.bc},
            "energy": {**self.breakdown.to_dict(), "renormalized": self.renorm},
            "renorm": self.renorm,
            "grad_norm": self.grad_norm,
            "grad_tol": self.grad_tol,
            "el_residual_max": self.el_residual_max,
            "pohozaev": self.pohozaev,
            "iterations": self.iterations,
            "winning_seed": self.winning_seed,
            "canonical": self.canonical,
            "converged": self.converged,
            "note": self.note,
            "diagnostics": self.diagnostics,
        }


def result_from_field(u, g, p, prof, *, grad_norm, iterations, seed, converged, tol, energies) -> SolveResult:
    return SolveResult(
        field=u,
        grid=g,
        params=p,
        breakdown=energy(u, g, p, prof),
        renorm=renormalized_energy(u, g, p, prof),
        grad_norm=grad_norm,
        el_residual_max=float(np.max(np.abs(el_residual(u, g, p, prof)))),
        pohozaev=pohozaev_residual(u, g, p, prof),
        iterations=iterations,
        winning_seed=seed,
        canonical=False,
        converged=converged,
        grad_tol=tol,
        energies=energies,
    )


def descend(seed, g: Grid, p: ProblemParams, prof: Profile, cfg: SolveConfig = SolveConfig(),
            *, seed_name: str = "custom") -> SolveResult:
    """Newton descent from one starting field.  Non-convergence is flagged, not raised."""
    seed = np.asarray(seed, dtype=float)
    if seed.shape != (g.n,):
        raise ValueError(f"seed has {seed.shape} entries, grid has {g.n} nodes")
    if g.bc != p.bc:
        raise ValueError(f"grid boundary {g.bc} does not match symmetry {p.symmetry}")
    fun = energy_functional(g, p, prof)
    tol = cfg.tol(p.epsilon)
    v, ok, its, trace = newton_descent(
        fun, fun.restrict(seed), grad_tol=tol, max_iters=cfg.max_iters,
        shift_scale=fun.shift_scale(), norm=fun.norm,
    )
    u = fun.full(v)
    return result_from_field(u, g, p, prof, grad_norm=trace.grad_norms[-1], iterations=its, seed=seed_name,
                   converged=ok, tol=tol, energies=list(trace.energies))


# -- canonical orientation ------------------------------------------------------


def _edge_value(u, g: Grid) -> float:
    stop = g.n - 1 if g.bc == "periodic" else g.n - 2
    tail = u[: stop + 1]
    nz = np.flatnonzero(tail != 0.0)
    return float(tail[nz[-1]]) if nz.size else 0.0


def _orientation_key(u, g: Grid):
    zs = find_zeros(u, g.x, periodic=g.bc == "periodic")
    left = zs.zeros[0] if zs.zeros else math.inf
    return (0 if _edge_value(u, g) >= 0.0 else 1, left)


def reflect(u) -> np.ndarray:
    """v_hat(x) = -v(-x) on a grid symmetric about the origin."""
    return -np.asarray(u)[::-1]


def canonicalize(u, g: Grid):
    """Pick the representative of {v, v_hat}; returns (field, reflected)."""
    if not g.symmetric:
        return u, False
    r = reflect(u)
    if g.bc == "periodic":
        r = r.copy()
        r[-1] = r[0]
    ku, kr = _orientation_key(u, g), _orientation_key(r, g)
    if kr < ku:
        return r, True
    if kr == ku:
        # fully symmetric tie: first differing node decides
        diff = np.flatnonzero(r != u)
        if diff.size and r[diff[0]] > u[diff[0]]:
            return r, True
    return u, False


def _canonical_result(res: SolveResult, prof: Profile) -> SolveResult:
    u, flipped = canonicalize(res.field, res.grid)
    if flipped:
        # reflection is a symmetry of the discrete energy; recompute for consistency
        res = result_from_field(u, res.grid, res.params, prof, grad_norm=res.grad_norm,
                      iterations=res.iterations, seed=res.winning_seed,
                      converged=res.converged, tol=res.grad_tol, energies=res.energies)
    res.canonical = True
    return res


# -- multi-start --------------------------------------------------------------


def _select(results: Sequence[SolveResult], prof: Profile) -> SolveResult:
    good = [r for r in results if r.converged]
    diags = [
        {"seed": r.winning_seed, "converged": r.converged, "iterations": r.iterations,
         "energy": r.energy, "grad_norm": r.grad_norm}
        for r in results
    ]
    if not good:
        raise SolveError("no start converged", diags)
    e_min = min(r.energy for r in good)
    # states closer than TIE_TOL are not resolved by the energy: prefer fewer
    # sign changes, then the canonical orientation
    tied = [_canonical_result(r, prof) for r in good if r.energy <= e_min + TIE_TOL]
    best = min(tied, key=_tie_key)
    best.diagnostics = diags
    return best


def _tie_key(r: SolveResult):
    n = len(find_zeros(r.field, r.grid.x, periodic=r.grid.bc == "periodic"))
    return (n, _orientation_key(r.field, r.grid), r.energy)


def _multi_start(g, p, prof, lm, cfg) -> SolveResult:
    seeds = seed_catalog(prof, lm, p, g)
    if cfg.seeds is not None:
        seeds = [(n, u) for n, u in seeds if n in cfg.seeds]
        if not seeds:
            raise SolveError("seed subset selects no admissible seed")
    results = [descend(u, g, p, prof, cfg, seed_name=name) for name, u in seeds]
    return _select(results, prof)


def global_minimize(g: Grid, p: ProblemParams, prof: Profile, lm: LandmarkSet,
                    cfg: SolveConfig = SolveConfig()) -> SolveResult:
    if p.symmetry != "free":
        raise ValueError("global_minimize needs symmetry 'free'")
    return _multi_start(g, p, prof, lm, cfg)


def odd_minimize(g: Grid, p: ProblemParams, prof: Profile, lm: LandmarkSet,
                 cfg: SolveConfig = SolveConfig()) -> SolveResult:
    if p.symmetry != "odd" or g.bc != "half_line_odd":
        raise ValueError("odd_minimize needs symmetry 'odd' on a half-line grid")
    return _multi_start(g, p, prof, lm, cfg)


def periodic_minimize(g: Grid, p: ProblemParams, prof: Profile, lm: LandmarkSet,
                      cfg: SolveConfig = SolveConfig()) -> SolveResult:
    if not prof.periodic or p.symmetry != "periodic":
        raise ValueError("periodic_minimize needs a periodic profile and symmetry 'periodic'")
    if not math.isclose(g.x_max - g.x_min, prof.period, rel_tol=1e-12):
        raise ValueError("periodic grid must span exactly one period")
    return _multi_start(g, p, prof, lm, cfg)


def periodic_odd_minimize(g: Grid, p: ProblemParams, prof: Profile, lm: LandmarkSet,
                          cfg: SolveConfig = SolveConfig()) -> SolveResult:
    if not prof.periodic or p.symmetry != "periodic_odd":
        raise ValueError("periodic_odd_minimize needs a periodic profile and symmetry 'periodic_odd'")
    if not math.isclose(g.x_max, prof.period / 2, rel_tol=1e-12):
        raise ValueError("odd periodic grid must span half a period")
    return _multi_start(g, p, prof, lm, cfg)


def minimize(g: Grid, p: ProblemParams, prof: Profile, lm: LandmarkSet,
             cfg: SolveConfig = SolveConfig()) -> SolveResult:
    """Dispatch on the symmetry class."""
    solver = {
        "free": global_minimize,
        "odd": odd_minimize,
        "periodic": periodic_minimize,
        "periodic_odd": periodic_odd_minimize,
    }[p.symmetry]
    return solver(g, p, prof, lm, cfg)


# -- verification --------------------------------------------------------------


@dataclass
class VerificationReport:
    checks: dict  # name -> {"ok": bool, "margin": float}
    skipped: list
    zeros: tuple
    note: str = CATALOG_NOTE

    @property
    def violations(self) -> list:
        return [k for k, v in self.checks.items() if not v["ok"]]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"ok": self.ok, "violations": self.violations, "checks": self.checks,
                "skipped": self.skipped, "zeros": list(self.zeros), "note": self.note}


POHOZAEV_TOL = 1e-3
SIGN_PATTERN_MAX_RATIO = 0.05


def _check(ok, margin):
    return {"ok": bool(ok), "margin": float(margin)}


def theta(u, x, eps, mu) -> np.ndarray:
    """eps^2 v'^2/2 + mu v^2/2 - v^4/4 at cell midpoints."""
    h = x[1] - x[0]
    dv = np.diff(u) / h
    vm = 0.5 * (u[1:] + u[:-1])
    xm = 0.5 * (x[1:] + x[:-1])
    return 0.5 * eps * eps * dv * dv + 0.5 * mu(xm) * vm * vm - 0.25 * vm**4


def verify_minimizer(r: SolveResult, g: Grid, p: ProblemParams, prof: Profile,
                     lm: LandmarkSet) -> VerificationReport:
    if not r.converged:
        raise ValueError("verification needs a converged result")
    checks, skipped = {}, []
    x, u = r.full_line()
    periodic = r.wraps
    zs = r.zeros()
    nz = len(zs)
    bound = 2 if periodic else 3
    checks["zero_count"] = _check(nz <= bound, bound - nz)

    if p.alpha > 0.0 and nz > 0 and p.epsilon / p.alpha <= SIGN_PATTERN_MAX_RATIO and not periodic:
        good = zs.signs[0] < 0 and zs.signs[-1] > 0
        checks["sign_pattern"] = _check(good, 1.0 if good else -1.0)
    else:
        skipped.append("sign_pattern")

    checks["pohozaev"] = _check(r.pohozaev < POHOZAEV_TOL, POHOZAEV_TOL - r.pohozaev)
    el_tol = max(1e-6, 100.0 * r.grad_tol * p.epsilon)
    checks["el_residual"] = _check(r.el_residual_max < el_tol, el_tol - r.el_residual_max)

    slack = 10.0 * r.grad_tol
    positive = nz == 0 and float(np.max(np.abs(u))) > 0.0
    if p.alpha == 0.0 and positive and not periodic:
        v = np.abs(u)
        # exponential decay beyond xi from a few anchor points
        worst = math.inf
        right = x >= 0
        xr, vr = x[right], v[right]
        x_end = xr[-1]
        for frac in (0.25, 0.5, 0.75):
            x0 = lm.xi + frac * (x_end - lm.xi)
            i0 = int(np.searchsorted(xr, x0))
            if i0 >= xr.size - 1:
                continue
            rate = math.sqrt(max(-float(prof.mu(xr[i0])), 0.0)) / p.epsilon
            env = vr[i0] * np.exp(-rate * (xr[i0:] - xr[i0]))
            worst = min(worst, float(np.min(env * (1 + 1e-6) + slack - vr[i0:])))
        if math.isfinite(worst):
            checks["exp_decay"] = _check(worst >= 0.0, worst)
        else:
            skipped.append("exp_decay")
        # theta monotone on [zeta, x_max]
        th = theta(vr, xr, p.epsilon, prof.mu)
        xm = 0.5 * (xr[1:] + xr[:-1])
        seg = th[xm >= lm.zeta]
        rise = float(np.max(np.diff(seg))) if seg.size > 1 else 0.0
        checks["theta_monotone"] = _check(rise <= slack, slack - rise)
        if lm.case == "A" and lm.mu_at_zero > 0.0:
            v0 = float(v[np.argmin(np.abs(x))])
            cap = math.sqrt(lm.mu_at_zero) + slack
            checks["v0_bound"] = _check(v0 <= cap, cap - v0)
        else:
            skipped.append("v0_bound")
    else:
        skipped.extend(["exp_decay", "theta_monotone", "v0_bound"])
    return VerificationReport(checks, skipped, zs.zeros)
