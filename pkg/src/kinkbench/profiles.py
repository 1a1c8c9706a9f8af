"""Illumination profiles mu, forcing f = -mu'/2, landmarks and threshold constants."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import PchipInterpolator

SQRT2 = math.sqrt(2.0)


class ProfileError(ValueError):
    """Raised when a profile violates the standing hypotheses."""


# -- specs -------------------------------------------------------------------


@dataclass(frozen=True)
class Gaussian:
    chi: float
    kind = "gaussian"

    def validate(self):
        if not 0.0 < self.chi < 1.0:
            raise ProfileError("gaussian: chi must lie in (0, 1)")


@dataclass(frozen=True)
class Donut:
    chi: float
    kind = "donut"

    def validate(self):
        if not 0.0 < self.chi < 4.0 * math.exp(-2.0):
            raise ProfileError("donut: chi must lie in (0, 4e^-2)")


@dataclass(frozen=True)
class DoubleGaussian:
    a: float
    chi: float
    kind = "double_gaussian"

    def validate(self):
        if not self.a > 1.0 / SQRT2:
            raise ProfileError("double_gaussian: a must exceed 1/sqrt(2)")
        if not 0.0 < self.chi < 2.0:
            raise ProfileError("double_gaussian: chi must lie in (0, 2)")


@dataclass(frozen=True)
class PeriodicCosine:
    T: float
    mean: float
    amplitude: float
    kind = "periodic_cosine"

    def validate(self):
        if not self.T > 0.0:
            raise ProfileError("periodic_cosine: T must be positive")
        if not self.amplitude > 0.0:
            raise ProfileError("periodic_cosine: amplitude must be positive")


@dataclass(frozen=True)
class Tabulated:
    samples: tuple  # ((x, mu), ...)
    kind = "tabulated"

    def validate(self):
        xs = [float(s[0]) for s in self.samples]
        if len(xs) < 4:
            raise ProfileError("tabulated: at least 4 samples required")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ProfileError("tabulated: x must be strictly increasing")


ProfileSpec = Union[Gaussian, Donut, DoubleGaussian, PeriodicCosine, Tabulated]

_KINDS = {
    "gaussian": Gaussian,
    "donut": Donut,
    "double_gaussian": DoubleGaussian,
    "periodic_cosine": PeriodicCosine,
    "tabulated": Tabulated,
}


def spec_from_dict(d: dict) -> ProfileSpec:
    """Parse ``{"kind": ..., params...}``."""
    d = dict(d)
    try:
        cls = _KINDS[d.pop("kind")]
    except KeyError as exc:
        raise ProfileError(f"unknown or missing profile kind: {exc}") from None
    if cls is Tabulated:
        if "samples" not in d:
            raise ProfileError("tabulated: samples required")
        samples = d.pop("samples")
        if isinstance(samples, str):
            samples = read_samples_csv(samples)
        d["samples"] = tuple((float(x), float(m)) for x, m in samples)
    try:
        spec = cls(**{k: (v if k == "samples" else float(v)) for k, v in d.items()})
    except TypeError as exc:
        raise ProfileError(f"{cls.kind}: {exc}") from None
    spec.validate()
    return spec


def spec_to_dict(spec: ProfileSpec) -> dict:
    out = {"kind": spec.kind}
    for name in spec.__dataclass_fields__:
        val = getattr(spec, name)
        out[name] = [list(s) for s in val] if name == "samples" else val
    return out


def read_samples_csv(text_or_path: str) -> list:
    """Read ``x,mu`` samples from a CSV path or literal CSV text."""
    if "\n" not in text_or_path:
        with open(text_or_path, newline="") as fh:
            text_or_path = fh.read()
    reader = csv.DictReader(io.StringIO(text_or_path))
    if reader.fieldnames != ["x", "mu"]:
        raise ProfileError('tabulated CSV must have header "x,mu"')
    try:
        return [(float(r["x"]), float(r["mu"])) for r in reader]
    except (TypeError, ValueError) as exc:
        raise ProfileError(f"tabulated CSV: {exc}") from None


# -- profiles ----------------------------------------------------------------


@dataclass(frozen=True)
class Profile:
    spec: Optional[ProfileSpec]
    mu: Callable[[np.ndarray], np.ndarray]
    f: Callable[[np.ndarray], np.ndarray]
    periodic: bool = False
    period: Optional[float] = None
    # half-width of the region where the profile is meaningfully defined
    scale: float = 1.0


def _even(fun):
    def wrapped(x):
        return fun(np.abs(np.asarray(x, dtype=float)))
    return wrapped


def _odd(fun):
    def wrapped(x):
        x = np.asarray(x, dtype=float)
        return np.sign(x) * fun(np.abs(x))
    return wrapped


def make_profile(spec: ProfileSpec) -> Profile:
    """Build the callable pair (mu, f) for a spec.

    Evaluation goes through |x| so that evenness of mu and oddness of f hold
    bit-for-bit, not just to rounding.
    """
    spec.validate()
    if isinstance(spec, Gaussian):
        chi = spec.chi
        mu = _even(lambda r: np.exp(-r * r) - chi)
        f = _odd(lambda r: r * np.exp(-r * r))
        return Profile(spec, mu, f, scale=math.sqrt(-math.log(chi)) + 1.0)
    if isinstance(spec, Donut):
        chi = spec.chi
        mu = _even(lambda r: r**4 * np.exp(-r * r) - chi)
        f = _odd(lambda r: (r**5 - 2.0 * r**3) * np.exp(-r * r))
        return Profile(spec, mu, f, scale=4.0)
    if isinstance(spec, DoubleGaussian):
        a, chi = spec.a, spec.chi

        def mu_r(r):
            return np.exp(-(r - a) ** 2) + np.exp(-(r + a) ** 2) - chi

        def f_r(r):
            return (r - a) * np.exp(-(r - a) ** 2) + (r + a) * np.exp(-(r + a) ** 2)

        return Profile(spec, _even(mu_r), _odd(f_r), scale=a + math.sqrt(max(-math.log(chi / 2), 1.0)) + 1.0)
    if isinstance(spec, PeriodicCosine):
        T, m, A = spec.T, spec.mean, spec.amplitude
        k = 2.0 * math.pi / T
        mu = _even(lambda r: m + A * np.cos(k * r))
        f = _odd(lambda r: 0.5 * A * k * np.sin(k * r))
        return Profile(spec, mu, f, periodic=True, period=T, scale=T / 2)
    if isinstance(spec, Tabulated):
        return _tabulated(spec)
    raise ProfileError(f"unsupported spec {spec!r}")


def _tabulated(spec: Tabulated) -> Profile:
    xs = np.array([s[0] for s in spec.samples], dtype=float)
    ms = np.array([s[1] for s in spec.samples], dtype=float)
    if xs[0] >= 0.0:
        keep = xs > 0.0
        xs = np.concatenate([-xs[keep][::-1], xs])
        ms = np.concatenate([ms[keep][::-1], ms])
    interp = PchipInterpolator(xs, ms, extrapolate=False)
    lo, hi = xs[0], xs[-1]
    m_lo, m_hi = ms[0], ms[-1]

    def raw(x):
        x = np.asarray(x, dtype=float)
        out = interp(np.clip(x, lo, hi))
        out = np.where(x < lo, m_lo, out)
        return np.where(x > hi, m_hi, out)

    def mu(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * (raw(x) + raw(-x))

    scale = float(max(abs(lo), abs(hi)))
    step = 1e-6 * scale

    def f(x):
        x = np.asarray(x, dtype=float)
        return -(mu(x + step) - mu(x - step)) / (4.0 * step)

    return Profile(spec, mu, f, scale=scale)


# -- landmarks ---------------------------------------------------------------


@dataclass(frozen=True)
class LandmarkSet:
    zeta: float
    xi: Optional[float]
    xi_prime: Optional[float]
    case: str  # "A" or "B"
    mu_at_zero: float
    mu_at_zeta: float
    single_bump: bool = False
    periodic: bool = False
    period: Optional[float] = None
    mu_at_half_period: Optional[float] = None
    nondegenerate_origin: bool = True

    def points(self) -> dict:
        """Named landmark positions on the full line (or one period)."""
        pts = {"0": 0.0}
        if self.periodic:
            pts["+T/2"] = self.period / 2
            pts["-T/2"] = -self.period / 2
            if self.xi is not None:
                pts["-xi"], pts["+xi"] = -self.xi, self.xi
            return pts
        if not self.single_bump:
            pts["-zeta"], pts["+zeta"] = -self.zeta, self.zeta
        pts["-xi"], pts["+xi"] = -self.xi, self.xi
        if self.xi_prime is not None:
            pts["-xi'"], pts["+xi'"] = -self.xi_prime, self.xi_prime
        return pts


_ROOT_XTOL = 1e-13


def _xmax_search(mu, zeta: float) -> float:
    x = max(2.0 * zeta, 1.0)
    for _ in range(60):
        if mu(x) < -1e-3:
            tail = mu(np.linspace(x, 2.0 * x, 257))
            if np.all(np.diff(tail) <= 1e-14) or np.all(tail < -1e-3):
                return x
        x *= 2.0
    raise ProfileError("profile violates hyp2: {mu >= 0} does not appear bounded")


def landmarks(p: Profile) -> LandmarkSet:
    """Locate zeta (max of mu), xi (outer zero) and xi' (inner zero, case B)."""
    if p.periodic:
        return _periodic_landmarks(p)
    mu, f = p.mu, p.f
    mu0 = float(mu(0.0))
    if abs(mu0) < 1e-8:
        raise ProfileError("degenerate profile: mu(0) vanishes")

    xs = np.linspace(0.0, p.scale * 2.0, 4001)
    vals = mu(xs)
    interior_max = np.flatnonzero((vals[1:-1] > vals[:-2]) & (vals[1:-1] >= vals[2:])) + 1
    significant = [i for i in interior_max if vals[i] - vals.min() > 1e-10]
    if len(significant) > 1:
        raise ProfileError("profile violates hyp3: several local maxima of mu on (0, inf)")

    if not significant:
        # maximum at the origin: single bump
        zeta, single = 0.0, True
    else:
        i = significant[0]
        res = optimize.minimize_scalar(
            lambda t: -float(mu(t)), bounds=(xs[i - 1], xs[i + 1]), method="bounded",
            options={"xatol": 1e-10},
        )
        a, b = res.x - 1e-4, res.x + 1e-4
        fa, fb = float(f(a)), float(f(b))
        # derivative polish: f = -mu'/2 changes sign at the maximum
        zeta = optimize.brentq(f, a, b, xtol=_ROOT_XTOL) if fa * fb < 0 else float(res.x)
        single = False
    mu_zeta = float(mu(zeta))
    if mu_zeta <= 0.0:
        raise ProfileError("profile violates hyp2: mu is nowhere positive")

    x_hi = _xmax_search(mu, max(zeta, 0.5))
    if float(mu(x_hi)) >= 0.0:
        raise ProfileError("profile violates hyp2: no sign change found for xi")
    xi = optimize.brentq(mu, zeta, x_hi, xtol=_ROOT_XTOL)
    xi_prime = None
    if mu0 < 0.0:
        if single:
            raise ProfileError("profile violates hyp3: mu(0) < 0 without an interior maximum")
        xi_prime = optimize.brentq(mu, 0.0, zeta, xtol=_ROOT_XTOL)
    case = "B" if mu0 < 0.0 else "A"

    nondeg = True
    if not single:
        d = 1e-3
        nondeg = float(f(d)) < 0.0 and (float(f(d)) - float(f(-d))) / (2 * d) < -1e-4
        if not nondeg:
            warnings.warn("profile has f'(0) >= 0 (degenerate minimum of mu at the origin)",
                          stacklevel=2)
    return LandmarkSet(zeta=float(zeta), xi=float(xi), xi_prime=None if xi_prime is None else float(xi_prime),
                       case=case, mu_at_zero=mu0, mu_at_zeta=mu_zeta, single_bump=single,
                       nondegenerate_origin=nondeg)


def _periodic_landmarks(p: Profile) -> LandmarkSet:
    T = p.period
    mu0 = float(p.mu(0.0))
    muh = float(p.mu(T / 2))
    xs = np.linspace(0.0, T / 2, 2001)
    if np.any(np.diff(p.mu(xs)) > 1e-14):
        raise ProfileError("profile violates hyp3: mu must decrease on (0, T/2)")
    if mu0 <= 0.0:
        raise ProfileError("periodic profile must be positive somewhere")
    if abs(muh) < 1e-8:
        raise ProfileError("degenerate profile: mu(T/2) vanishes")
    xi = None
    if muh < 0.0:
        xi = float(optimize.brentq(p.mu, 0.0, T / 2, xtol=_ROOT_XTOL))
    return LandmarkSet(zeta=0.0, xi=xi, xi_prime=None, case="A" if muh > 0 else "B",
                       mu_at_zero=mu0, mu_at_zeta=mu0, periodic=True, period=T,
                       mu_at_half_period=muh)


# -- thresholds --------------------------------------------------------------


@dataclass(frozen=True)
class Thresholds:
    alpha_star: float
    alpha_double_star: Optional[float]
    alpha_odd: Optional[float]
    K: float
    K_quadrature: float = field(default=float("nan"))


def _k_quadrature(p: Profile, lm: LandmarkSet) -> float:
    def integrand(x):
        m = float(p.mu(x))
        return abs(float(p.f(x))) * math.sqrt(m) if m > 0.0 else 0.0

    if lm.periodic:
        hi = lm.period / 2 if lm.xi is None else lm.xi
        pts = None
    else:
        hi = lm.xi
        pts = [q for q in (lm.zeta, lm.xi_prime) if q]
    lo = lm.xi_prime if lm.xi_prime is not None else 0.0
    if pts:
        pts = [q for q in pts if lo < q < hi] or None
    val, _ = integrate.quad(integrand, lo, hi, points=pts, epsabs=1e-13, epsrel=1e-12, limit=400)
    return 2.0 * val


def thresholds(p: Profile, lm: LandmarkSet) -> Thresholds:
    """Closed-form alpha*, alpha**, alpha_odd and K, with K cross-checked by quadrature."""
    if lm.case == "A" and lm.mu_at_zero <= 0.0:
        raise ProfileError("internal inconsistency: case A with mu(0) <= 0")
    if lm.periodic:
        m0 = lm.mu_at_zero ** 1.5
        if lm.case == "A":
            mh = lm.mu_at_half_period ** 1.5
            K = (2.0 / 3.0) * (m0 - mh)
            ads = SQRT2 * (m0 + mh) / (m0 - mh)
        else:
            K = (2.0 / 3.0) * m0
            ads = None
        aodd = None
    else:
        mz = lm.mu_at_zeta ** 1.5
        if lm.case == "A":
            m0 = lm.mu_at_zero ** 1.5
            K = (2.0 / 3.0) * (2.0 * mz - m0)
            if lm.single_bump:
                ads = aodd = None
            else:
                ads = SQRT2 * (mz + m0) / (mz - m0)
                aodd = SQRT2 * mz / (mz - m0)
        else:
            K = (4.0 / 3.0) * mz
            ads = aodd = None
    kq = _k_quadrature(p, lm)
    if abs(kq - K) > 1e-6 * abs(K):
        raise ProfileError(f"K mismatch: closed form {K!r} vs quadrature {kq!r}")
    return Thresholds(alpha_star=SQRT2, alpha_double_star=ads, alpha_odd=aodd, K=K, K_quadrature=kq)


def renorm_bound(lm: LandmarkSet, th: Thresholds, alpha: float, symmetry: str = "free") -> float:
    """Asymptotic upper bound for the renormalized energy of the minimizer.

    Minimum over the energies of the comparison configurations; for the
    two-bump case A global minimizer this reproduces the three-regime formula.
    """
    if lm.periodic:
        m0 = lm.mu_at_zero ** 1.5
        if lm.case == "A":
            mh = lm.mu_at_half_period ** 1.5
            flat = alpha * th.K
            kinked = (2.0 * SQRT2 / 3.0) * (m0 + mh)
        else:
            flat = (2.0 * alpha / 3.0) * m0
            kinked = (2.0 * SQRT2 / 3.0) * m0
        return kinked if symmetry == "periodic_odd" else min(flat, kinked)
    mz = lm.mu_at_zeta ** 1.5
    if lm.case == "B":
        return (4.0 / 3.0) * min(alpha, SQRT2) * mz
    m0 = lm.mu_at_zero ** 1.5
    aK = alpha * th.K
    three = (2.0 / 3.0) * (2.0 * (SQRT2 - alpha) * mz + (SQRT2 + alpha) * m0) + aK
    one_at_origin = (2.0 / 3.0) * (SQRT2 - alpha) * m0 + aK
    if symmetry == "odd":
        return min(one_at_origin, three)
    return min(aK, (2.0 / 3.0) * (SQRT2 - alpha) * mz + aK, three)
