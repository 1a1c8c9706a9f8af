"""Zero location, kink classification, parameter sweeps, threshold bisection,
power-law fits and the Poincare constants eps0, eps1."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .energy import Grid, ProblemParams, default_grid
from .minimize import QuarticFunctional, SolveConfig, SolveResult, minimize
from .newton import newton_descent
from .profiles import LandmarkSet, Profile, ProfileSpec, landmarks, make_profile, thresholds
from .zeros import ZeroSet
from .zeros import find_zeros as _find_zeros

STANDARD_MU_CUTOFF = 0.05
ASSIGN_RADIUS = 0.3
STANDARD_WINDOW = 5.0
SHADOW_WINDOW = 4.0
GIANT_PLATEAU = 0.5  # fraction of xi' spanned by the inner plateau


class AnalysisError(RuntimeError):
    pass


def find_zeros(u, g) -> ZeroSet:
    """Zeros of a nodal field on a Grid (or on an explicit node array)."""
    if isinstance(g, Grid):
        return _find_zeros(u, g.x, periodic=g.bc == "periodic")
    return _find_zeros(u, g)


# -- shadow profile -------------------------------------------------------------


@dataclass(frozen=True)
class ShadowProfile:
    s: np.ndarray
    v: np.ndarray
    mu1: float
    af: float
    residual_max: float
    converged: bool

    def __call__(self, s):
        return np.interp(s, self.s, self.v)


def _shadow_residual(s, v, mu1, af):
    h = s[1] - s[0]
    lap = (v[:-2] - 2 * v[1:-1] + v[2:]) / (h * h)
    inner = s[1:-1]
    return lap + mu1 * inner * v[1:-1] - v[1:-1] ** 3 + af


def shadow_profile(mu1: float, af: float, S: float = 8.0, n: int = 1600) -> ShadowProfile:
    """Least-energy solution of V'' + mu1 s V - V^3 + af = 0 on [-S, S].

    Orientation is the right edge of the illuminated region (mu1 < 0, af > 0):
    V -> -sqrt(mu1 s) on the illuminated side and af / (-mu1 s) on the dark side,
    which fixes the two Dirichlet values.
    """
    if not mu1 < 0.0:
        raise ValueError("shadow profile needs mu1 < 0")
    if not af > 0.0:
        raise ValueError("shadow profile needs af > 0")
    if n < 16 or not S > 0.0:
        raise ValueError("shadow grid needs n >= 16 and S > 0")
    s = np.linspace(-S, S, n)
    left = -math.sqrt(-mu1 * S)
    right = af / (-mu1 * S)
    base = np.zeros(n)
    base[0], base[-1] = left, right
    free = np.ones(n, dtype=bool)
    free[0] = free[-1] = False
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    fun = QuarticFunctional(s[1] - s[0], 1.0, mu1 * s, 1.0, np.full(n, af), w, free, base=base)
    with np.errstate(invalid="ignore"):
        seed = np.where(s < 0.0, -np.sqrt(np.maximum(mu1 * s, 0.0)),
                        np.minimum(af / np.maximum(-mu1 * s, 1e-300), np.cbrt(af)))
    seed[0], seed[-1] = left, right
    v, ok, _, _ = newton_descent(fun, fun.restrict(seed), grad_tol=1e-10, max_iters=500,
                                 shift_scale=fun.shift_scale(), norm=fun.norm)
    if not ok:
        raise AnalysisError("shadow profile descent did not converge")
    vf = fun.full(v)
    res = float(np.max(np.abs(_shadow_residual(s, vf, mu1, af))))
    return ShadowProfile(s, vf, mu1, af, res, ok)


def _oriented_shadow(mu1: float, af: float):
    """Shadow profile for any edge, by reflection of the right-edge solution.

    If W solves the right-edge problem then W(-s) solves it with mu1 -> -mu1,
    and -W solves it with af -> -af.
    """
    base = shadow_profile(-abs(mu1), abs(af))
    flip_s = mu1 > 0.0
    sign = 1.0 if af > 0.0 else -1.0

    def at(s):
        s = np.asarray(s, dtype=float)
        return sign * base(-s if flip_s else s)

    return at


# -- classification ----------------------------------------------------------------


@dataclass(frozen=True)
class Kink:
    location: float
    nearest_landmark: Optional[str]
    type: str  # standard | shadow | giant | deferred
    profile_error: float
    amplitude_stat: float
    candidates: tuple = ()
    reason: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["candidates"] = list(self.candidates)
        return d


@dataclass(frozen=True)
class KinkReport:
    kinks: tuple

    @property
    def types(self) -> list:
        return [k.type for k in self.kinks]

    def to_dict(self) -> dict:
        return {"kinks": [k.to_dict() for k in self.kinks]}


def _landmark_table(lm: LandmarkSet) -> dict:
    pts = dict(lm.points())
    if lm.periodic:
        pts.pop("-T/2", None)
    return pts


def _min_spacing(pts: dict) -> float:
    vals = sorted(set(pts.values()))
    gaps = np.diff(vals)
    return float(np.min(gaps)) if gaps.size else math.inf


def _wrap(d, period):
    if period is None:
        return abs(d)
    d = abs(d) % period
    return min(d, period - d)


def classify_kinks(r: SolveResult, prof: Profile, lm: LandmarkSet) -> KinkReport:
    """Assign every zero of the minimizer to a landmark and a kink type."""
    x, u = r.full_line()
    eps, alpha = r.params.epsilon, r.params.alpha
    zs = r.zeros()
    pts = _landmark_table(lm)
    period = lm.period if lm.periodic else None
    radius = ASSIGN_RADIUS * _min_spacing(pts)
    kinks = []
    for z in zs.zeros:
        dist = sorted((_wrap(z - loc, period), name) for name, loc in pts.items())
        d1, name1 = dist[0]
        if d1 > radius:
            kinks.append(Kink(z, None, "deferred", math.nan, math.nan, (name1,),
                              "no landmark within the assignment radius"))
            continue
        if len(dist) > 1 and dist[1][0] < 2.0 * d1:
            kinks.append(Kink(z, None, "deferred", math.nan, math.nan, (name1, dist[1][1]),
                              "ambiguous landmark"))
            continue
        loc = pts[name1]
        mu_l = float(prof.mu(loc))
        if mu_l > STANDARD_MU_CUTOFF:
            kinks.append(_standard(z, name1, x, u, eps, prof, period if r.wraps else None))
        elif name1.lstrip("+-") in ("xi", "xi'"):
            kinks.append(_shadow(z, name1, loc, x, u, eps, alpha, prof))
        elif name1.lstrip("+-") in ("0", "T/2") and mu_l < 0.0:
            kinks.append(_giant(z, name1, loc, x, u, eps, alpha, prof, lm))
        else:
            kinks.append(Kink(z, name1, "deferred", math.nan, math.nan, (name1,),
                              "landmark fits no kink type"))
    return KinkReport(tuple(kinks))


def _standard(z, name, x, u, eps, prof, period=None) -> Kink:
    m = float(prof.mu(z))
    m = max(m, 0.0)
    s = np.linspace(-STANDARD_WINDOW, STANDARD_WINDOW, 401)
    vals = np.interp(z + s * eps, x, u, period=period)
    # orientation from the field itself
    sign = 1.0 if vals[-1] >= vals[0] else -1.0
    model = sign * math.sqrt(m) * np.tanh(s * math.sqrt(m / 2.0))
    err = float(np.max(np.abs(vals - model)))
    amp = abs(float(vals[-1] - vals[0])) / (2.0 * math.sqrt(m)) if m > 0 else math.nan
    return Kink(z, name, "standard", err, amp)


def _shadow(z, name, loc, x, u, eps, alpha, prof) -> Kink:
    amp = abs(float(np.interp(loc, x, u))) / eps ** (1.0 / 3.0)
    mu1 = -2.0 * float(prof.f(loc))  # f = -mu'/2
    af = alpha * float(prof.f(loc))
    if mu1 == 0.0 or af == 0.0:
        return Kink(z, name, "shadow", math.nan, amp, reason="degenerate rescaled problem")
    shape = _oriented_shadow(mu1, af)
    s = np.linspace(-SHADOW_WINDOW, SHADOW_WINDOW, 321)
    scale = eps ** (2.0 / 3.0)
    vals = np.interp(loc + s * scale, x, u) / eps ** (1.0 / 3.0)
    err = float(np.max(np.abs(vals - shape(s))))
    return Kink(z, name, "shadow", err, amp)


def _giant(z, name, loc, x, u, eps, alpha, prof, lm) -> Kink:
    if lm.periodic:
        half = lm.period / 2
        reach = GIANT_PLATEAU * (half - lm.xi) if lm.xi is not None else GIANT_PLATEAU * half
    else:
        reach = GIANT_PLATEAU * lm.xi_prime
    d = np.array([_wrap(xx - loc, lm.period if lm.periodic else None) for xx in x])
    sel = d <= reach
    mu = prof.mu(x[sel])
    target = -alpha * prof.f(x[sel]) / mu
    gap = np.abs(u[sel] / eps - target)
    stat = float(np.max(gap)) if gap.size else math.nan
    return Kink(z, name, "giant", stat, stat)


# -- sweeps ------------------------------------------------------------------------

SWEEP_HEADER = ["epsilon", "alpha", "n_zeros", "z1", "z2", "z3", "E", "renorm",
                "class1", "class2", "class3", "residual", "sup_u", "error"]


@dataclass
class SweepTable:
    rows: list
    results: dict = field(default_factory=dict, repr=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for row in self.rows:
            w.writerow([_fmt(row.get(k)) for k in SWEEP_HEADER])
        return buf.getvalue()

    @property
    def failed(self) -> list:
        return [r for r in self.rows if r.get("error")]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _solve_point(spec: ProfileSpec, eps: float, alpha: float, symmetry: str, cfg: SolveConfig,
                 grid_kw: Optional[dict] = None):
    prof = make_profile(spec)
    lm = landmarks(prof)
    p = ProblemParams(eps, alpha, symmetry)
    g = default_grid(prof, lm, p, **(grid_kw or {}))
    return minimize(g, p, prof, lm, cfg)


def _sweep_row(spec, eps, alpha, symmetry, cfg, grid_kw):
    row = {"epsilon": float(eps), "alpha": float(alpha)}
    try:
        r = _solve_point(spec, eps, alpha, symmetry, cfg, grid_kw)
        prof = make_profile(spec)
        lm = landmarks(prof)
        rep = classify_kinks(r, prof, lm)
        zs = [k.location for k in rep.kinks]
        row.update(n_zeros=len(zs), E=r.energy, renorm=r.renorm,
                   residual=r.el_residual_max, sup_u=float(np.max(np.abs(r.field))), error="")
        for i in range(3):
            row[f"z{i + 1}"] = zs[i] if i < len(zs) else None
            row[f"class{i + 1}"] = rep.kinks[i].type if i < len(zs) else None
        return row, r
    except Exception as exc:  # recorded in the row, never fatal to the sweep
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row, None


def sweep(spec: ProfileSpec, eps_list: Sequence[float], alpha_list: Sequence[float],
          symmetry: str = "free", cfg: SolveConfig = SolveConfig(), *,
          workers: Optional[int] = None, grid_kw: Optional[dict] = None) -> SweepTable:
    """Solve every (eps, alpha) pair; rows come back sorted by (eps, alpha)."""
    if not eps_list or not alpha_list:
        raise ValueError("sweep needs nonempty eps and alpha lists")
    points = sorted({(float(e), float(a)) for e in eps_list for a in alpha_list})
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_sweep_row, spec, e, a, symmetry, cfg, grid_kw) for e, a in points]
            out = [f.result() for f in futs]
    else:
        out = [_sweep_row(spec, e, a, symmetry, cfg, grid_kw) for e, a in points]
    rows = [row for row, _ in out]
    results = {pt: r for pt, (_, r) in zip(points, out) if r is not None}
    return SweepTable(rows, results)


# -- power laws ----------------------------------------------------------------------


def fit_power_law(pairs) -> tuple:
    """Least-squares slope of log y against log eps, with r^2.

    When r^2 < 0.9 the largest-eps point is dropped once and the fit redone.
    """
    pairs = sorted((float(e), float(y)) for e, y in pairs)
    if len(pairs) < 4:
        raise ValueError("power-law fit needs at least 4 pairs")
    if any(e <= 0.0 or y <= 0.0 for e, y in pairs):
        raise ValueError("power-law fit needs positive values")
    slope, r2 = _loglog(pairs)
    if r2 < 0.9:
        slope, r2 = _loglog(pairs[:-1])
    return slope, r2


def _loglog(pairs):
    lx = np.log([e for e, _ in pairs])
    ly = np.log([y for _, y in pairs])
    slope, icpt = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + icpt)
    ss = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss if ss > 0 else 1.0
    return float(slope), r2


# -- thresholds ------------------------------------------------------------------------

CRITERIA = ("zero_count_change", "outer_zero_jump", "odd_zero_count_change")


@dataclass(frozen=True)
class ThresholdEstimate:
    criterion: str
    alpha_lo: float
    alpha_hi: float
    estimate: float
    closed_form: Optional[float]
    relative_gap: Optional[float]
    detector_lo: object = None
    detector_hi: object = None
    brackets: tuple = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["brackets"] = [list(b) for b in self.brackets]
        return d


def _outer_label(zeros, lm: LandmarkSet) -> str:
    if not zeros:
        return "none"
    z = abs(zeros[0])
    cands = {"zeta": lm.zeta}
    if lm.xi is not None:
        cands["xi"] = lm.xi
    if lm.xi_prime is not None:
        cands["xi"] = lm.xi if abs(z - lm.xi) < abs(z - lm.xi_prime) else lm.xi_prime
    best = min(cands, key=lambda k: abs(z - cands[k]))
    return best


def _detector(criterion, spec, eps, alpha, cfg, grid_kw):
    prof = make_profile(spec)
    lm = landmarks(prof)
    if criterion == "odd_zero_count_change":
        sym = "periodic_odd" if prof.periodic else "odd"
    else:
        sym = "periodic" if prof.periodic else "free"
    r = _solve_point(spec, eps, alpha, sym, cfg, grid_kw)
    zs = r.zeros()
    if criterion == "outer_zero_jump":
        return _outer_label(zs.zeros, lm)
    return len(zs)


def estimate_threshold(spec: ProfileSpec, eps: float, alpha_bracket, criterion: str,
                       cfg: SolveConfig = SolveConfig(), *, width: float = 1e-3,
                       grid_kw: Optional[dict] = None) -> ThresholdEstimate:
    """Bisect in alpha for the change of a regime detector at fixed eps."""
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}; expected one of {CRITERIA}")
    lo, hi = (float(a) for a in alpha_bracket)
    if not 0.0 <= lo < hi:
        raise ValueError("bracket must satisfy 0 <= lo < hi")
    d_lo = _detector(criterion, spec, eps, lo, cfg, grid_kw)
    d_hi = _detector(criterion, spec, eps, hi, cfg, grid_kw)
    if d_lo == d_hi:
        raise AnalysisError(
            f"no regime change in [{lo}, {hi}]: detector is {d_lo!r} at both ends")
    brackets = [(lo, hi)]
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        d = _detector(criterion, spec, eps, mid, cfg, grid_kw)
        if d == d_lo:
            lo = mid
        else:
            hi, d_hi = mid, d
        brackets.append((lo, hi))
    est = 0.5 * (lo + hi)
    prof = make_profile(spec)
    lm = landmarks(prof)
    th = thresholds(prof, lm)
    closed = {
        "outer_zero_jump": th.alpha_star,
        "zero_count_change": th.alpha_double_star,
        "odd_zero_count_change": th.alpha_odd,
    }[criterion]
    gap = abs(est - closed) / closed if closed else None
    return ThresholdEstimate(criterion, lo, hi, est, closed, gap, d_lo, d_hi, tuple(brackets))


# -- Poincare constants ------------------------------------------------------------------


@dataclass(frozen=True)
class EigConstants:
    eps0: float
    eps1: float

    def to_dict(self) -> dict:
        return asdict(self)


def _pencil(mu_vals, h):
    """Interior mass diag (trapezoid, mu-weighted) and stiffness bands."""
    m = mu_vals * h
    k_diag = np.full(m.size, 2.0 / h)
    k_off = np.full(m.size - 1, -1.0 / h)
    return m, k_diag, k_off


def _top_eigenvalue(m, k_diag, k_off, shift, tol=1e-8, max_iter=20000) -> float:
    """Largest lambda of diag(m) phi = lambda K phi.

    Power iteration on K^{-1}(M + shift K) gives a starting pair; Rayleigh-quotient
    inverse iteration then refines it to the requested relative tolerance.
    """
    n = m.size
    kb = np.zeros((3, n))
    kb[0, 1:] = k_off
    kb[1] = k_diag
    kb[2, :-1] = k_off

    def kmul(v):
        out = k_diag * v
        out[:-1] += k_off * v[1:]
        out[1:] += k_off * v[:-1]
        return out

    phi = np.ones(n)
    lam = 0.0
    for _ in range(max_iter):
        y = solve_banded((1, 1), kb, m * phi) + shift * phi
        kn = math.sqrt(float(y @ kmul(y)))
        phi = y / kn
        new = float(phi @ (m * phi))  # K-normalized, so this is the Rayleigh quotient
        if abs(new - lam) <= 1e-5 * max(abs(new), 1e-300):
            lam = new
            break
        lam = new
    for _ in range(50):
        ab = -lam * kb
        ab[1] += m
        try:
            y = solve_banded((1, 1), ab, kmul(phi))
        except np.linalg.LinAlgError:
            break
        phi = y / math.sqrt(float(y @ kmul(y)))
        new = float(phi @ (m * phi))
        done = abs(new - lam) <= tol * abs(new)
        lam = new
        if done:
            break
    return lam


def poincare_constants(prof, g: Grid) -> EigConstants:
    """eps0 and eps1 of the discrete quadratic form on a symmetric Dirichlet grid.

    eps0^2 is the largest lambda with M_mu phi = lambda K phi over all fields,
    eps1^2 the same over odd fields (pinned origin, computed on the half-line).
    ``prof`` may be a Profile or a plain callable mu.
    """
    mu: Callable = prof.mu if isinstance(prof, Profile) else prof
    x = g.x
    h = g.h
    mu_int = np.asarray(mu(x[1:-1]), dtype=float)
    if not np.any(mu_int > 0.0):
        raise AnalysisError("mu <= 0 at every interior node: no positive eigenvalue")
    length = g.x_max - g.x_min
    shift = max(float(np.max(np.maximum(-mu_int, 0.0))), 1e-12) * (length / math.pi) ** 2 * 1.5
    lam0 = _top_eigenvalue(*_pencil(mu_int, h), shift)
    if not g.symmetric:
        raise ValueError("poincare_constants needs a grid symmetric about the origin")
    half = x[1:-1] > 0.0
    mu_half = mu_int[half]
    if np.any(mu_half > 0.0):
        lam1 = _top_eigenvalue(*_pencil(mu_half, h), shift)
    else:
        lam1 = 0.0
    if lam0 <= 0.0:
        raise AnalysisError("no positive eigenvalue")
    return EigConstants(math.sqrt(lam0), math.sqrt(max(lam1, 0.0)))
