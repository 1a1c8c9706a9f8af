"""Comparison functions used as energy upper bounds and as multi-start seeds.

Every seed is the absolute corner profile sqrt(max(mu, 0)) (with exponential
tails of width eps^2 past +-xi) multiplied by a sign pattern.  Sign changes at
a point where mu > 0 are smoothed by a tanh layer of width eps; a sign change
at the origin in case B is the linear ramp kappa x across the dark region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .energy import Grid, ProblemParams
from .profiles import LandmarkSet, Profile

SEED_IDS = (
    "phi_plus", "phi_minus", "eta_left", "eta_right", "psi_oddA", "chi_oddA",
    "phiB_odd", "psiB_odd", "const_sqrt_mu_plus", "const_sqrt_mu_minus",
    "zero", "odd_linear_ramp",
)


class SeedError(ValueError):
    pass


@dataclass(frozen=True)
class LayerParams:
    zeta_eps: float
    k_eps: float
    l_eps: float
    l_prime_eps: Optional[float]
    kappa_eps: Optional[float]


def _l_const(mu, at: float, zeta_eps: float, eps: float) -> float:
    # l tanh(zeta_eps sqrt(mu(at)/2)) = sqrt(mu(at + zeta_eps eps))
    m_at = float(mu(at))
    return math.sqrt(max(float(mu(at + zeta_eps * eps)), 0.0)) / math.tanh(zeta_eps * math.sqrt(m_at / 2.0))


def layer_params(prof: Profile, lm: LandmarkSet, eps: float) -> LayerParams:
    if not 0.0 < eps < 0.3:
        raise SeedError("test function inadmissible at this eps: eps must lie in (0, 0.3)")
    ze = -math.log(eps)
    width = ze * eps
    mu = prof.mu
    if lm.periodic:
        T = lm.period
        l_eps = _l_const(mu, 0.0, ze, eps)
        lp = _l_const(mu, T / 2, ze, eps) if lm.case == "A" else None
        if 2 * width >= T / 2:
            raise SeedError("test function inadmissible at this eps: layers overlap")
        return LayerParams(ze, 0.0, l_eps, lp, None)
    xi = lm.xi
    k_eps = math.sqrt(max(float(mu(xi - eps * eps)), 0.0)) / (eps * math.e)
    if lm.single_bump:
        l0 = _l_const(mu, 0.0, ze, eps)
        return LayerParams(ze, k_eps, l0, l0, None)
    zeta = lm.zeta
    if not (width < zeta and zeta + width < xi - eps * eps):
        raise SeedError("test function inadmissible at this eps: layers overlap")
    l_eps = _l_const(mu, zeta, ze, eps)
    lp = kappa = None
    if lm.case == "A":
        if 2 * width > zeta:
            raise SeedError("test function inadmissible at this eps: layers overlap")
        lp = _l_const(mu, 0.0, ze, eps)
    else:
        if lm.xi_prime + eps * eps >= zeta - width:
            raise SeedError("test function inadmissible at this eps: layers overlap")
        a = lm.xi_prime + eps * eps
        kappa = math.sqrt(max(float(mu(a)), 0.0)) / a
    return LayerParams(ze, k_eps, l_eps, lp, kappa)


# -- assembly ------------------------------------------------------------------


def _magnitude(x, prof: Profile, lm: LandmarkSet, eps: float, lp: LayerParams) -> np.ndarray:
    mag = np.sqrt(np.maximum(prof.mu(x), 0.0))
    if lm.periodic:
        return mag
    e2 = eps * eps
    ax = np.abs(x)
    tail = lp.k_eps * eps * np.exp(-np.maximum(ax - lm.xi, -e2) / e2)
    return np.where(ax >= lm.xi - e2, tail, mag)


def _pattern(x, transitions, base_sign, prof, lm, eps, lp) -> np.ndarray:
    """Sample sign * magnitude with the given transitions.

    ``transitions`` is a list of (location, landmark_value) in increasing
    order; the sign flips across each one, starting from ``base_sign`` on the
    far left.
    """
    x = np.asarray(x, dtype=float)
    mag = _magnitude(x, prof, lm, eps, lp)
    sign = np.full(x.shape, float(base_sign))
    for loc, _ in transitions:
        sign = np.where(x > loc, -sign, sign)
    out = sign * mag
    width = lp.zeta_eps * eps
    s_left = float(base_sign)
    for loc, _ in transitions:
        m_loc = float(prof.mu(loc))
        if m_loc > 0.0:
            l_const = lp.l_eps if (loc != 0.0 or lm.periodic) else lp.l_prime_eps
            near = np.abs(x - loc) <= width
            # rising when the sign goes - to +
            layer = -s_left * l_const * np.tanh((x - loc) / eps * math.sqrt(m_loc / 2.0))
            out = np.where(near, layer, out)
        elif lp.kappa_eps is not None:
            reach = lm.xi_prime + eps * eps
            near = np.abs(x - loc) <= reach
            out = np.where(near, -s_left * lp.kappa_eps * (x - loc), out)
        s_left = -s_left
    return out


def _odd_ramp(x, prof, lm) -> np.ndarray:
    amp = math.sqrt(lm.mu_at_zeta)
    z = lm.zeta if lm.zeta > 0 else 0.5 * lm.xi
    ax = np.abs(x)
    ramp = np.where(ax <= z, ax / z, np.clip((lm.xi - ax) / (lm.xi - z), 0.0, 1.0))
    return np.sign(x) * amp * ramp


def _applicable(seed_id: str, lm: LandmarkSet) -> bool:
    if seed_id in ("zero", "const_sqrt_mu_plus", "const_sqrt_mu_minus"):
        return True
    if lm.periodic:
        return seed_id == ("psi_oddA" if lm.case == "A" else "psiB_odd")
    if seed_id in ("phi_plus", "phi_minus", "odd_linear_ramp"):
        return True
    if lm.single_bump:
        return seed_id == "chi_oddA"
    if lm.case == "A":
        return seed_id in ("eta_left", "eta_right", "psi_oddA", "chi_oddA")
    return seed_id in ("phiB_odd", "psiB_odd")


def _evaluate(seed_id: str, x: np.ndarray, prof: Profile, lm: LandmarkSet, eps: float,
              lp: LayerParams) -> np.ndarray:
    pat = lambda tr, s: _pattern(x, tr, s, prof, lm, eps, lp)  # noqa: E731
    if seed_id == "zero":
        return np.zeros_like(x)
    if seed_id == "const_sqrt_mu_plus":
        return np.sqrt(np.maximum(prof.mu(x), 0.0))
    if seed_id == "const_sqrt_mu_minus":
        return -np.sqrt(np.maximum(prof.mu(x), 0.0))
    if lm.periodic:
        half = lm.period / 2
        # odd periodic: negative on (-T/2, 0), positive on (0, T/2)
        val = pat([(0.0, "0")], -1)
        width = lp.zeta_eps * eps
        if lm.case == "A":
            m_h = float(prof.mu(half))
            d = half - np.abs(x)
            layer = np.sign(x) * lp.l_prime_eps * np.tanh(d / eps * math.sqrt(m_h / 2.0))
            val = np.where(d <= width, layer, val)
        return val
    z = lm.zeta
    if seed_id == "phi_plus":
        return pat([], 1)
    if seed_id == "phi_minus":
        return pat([], -1)
    if seed_id == "eta_left":
        return pat([(-z, "-zeta")], -1)
    if seed_id == "eta_right":
        return _reflect_eval(lambda t: _pattern(t, [(-z, "-zeta")], -1, prof, lm, eps, lp), x)
    if seed_id == "psi_oddA":
        return _odd_eval(lambda t: _pattern(t, [(-z, "-zeta"), (0.0, "0"), (z, "+zeta")], -1,
                                            prof, lm, eps, lp), x)
    if seed_id == "chi_oddA":
        return _odd_eval(lambda t: _pattern(t, [(0.0, "0")], -1, prof, lm, eps, lp), x)
    if seed_id == "phiB_odd":
        return _odd_eval(lambda t: _pattern(t, [(0.0, "0")], -1, prof, lm, eps, lp), x)
    if seed_id == "psiB_odd":
        return _odd_eval(lambda t: _pattern(t, [(-z, "-zeta"), (0.0, "0"), (z, "+zeta")], -1,
                                            prof, lm, eps, lp), x)
    if seed_id == "odd_linear_ramp":
        return _odd_ramp(x, prof, lm)
    raise SeedError(f"unknown seed id {seed_id!r}")


def _reflect_eval(fun, x):
    """Sample v_hat(x) = -v(-x)."""
    return -fun(-x)


def _odd_eval(fun, x):
    """Sample an odd function from its values on x >= 0, so oddness is exact."""
    return np.sign(x) * fun(np.abs(x))


_LAYER_FREE = {"zero", "const_sqrt_mu_plus", "const_sqrt_mu_minus", "odd_linear_ramp"}


def build_seed(seed_id: str, prof: Profile, lm: LandmarkSet, eps: float, g: Grid) -> np.ndarray:
    if seed_id not in SEED_IDS:
        raise SeedError(f"unknown seed id {seed_id!r}")
    if not _applicable(seed_id, lm):
        raise SeedError(f"seed {seed_id} is inapplicable to a case-{lm.case} profile")
    # layer-free seeds remain admissible at any eps
    lp = None if seed_id in _LAYER_FREE else layer_params(prof, lm, eps)
    x = g.x
    u = _evaluate(seed_id, x, prof, lm, eps, lp).astype(float)
    if g.bc == "periodic":
        u[-1] = u[0]
    else:
        u[0] = u[-1] = 0.0
    return u


def seed_csv(seed_id: str, x, u) -> str:
    """CSV "x,u" preceded by a comment line naming the seed."""
    lines = [f"# seed: {seed_id}", "x,u"]
    lines.extend(f"{float(a)!r},{float(b)!r}" for a, b in zip(x, u))
    return "\n".join(lines) + "\n"


_ODD_IDS = {"psi_oddA", "chi_oddA", "phiB_odd", "psiB_odd", "odd_linear_ramp", "zero"}


def seed_catalog(prof: Profile, lm: LandmarkSet, params: ProblemParams, g: Grid):
    """All admissible seeds plus sign-flipped and reflected variants.

    Deterministic order; variants that coincide with an earlier entry are
    dropped.
    """
    odd_only = params.symmetry in ("odd", "periodic_odd")
    out: list = []

    def push(name, u):
        for _, v in out:
            if np.array_equal(v, u):
                return
        out.append((name, u))

    for sid in SEED_IDS:
        if not _applicable(sid, lm):
            continue
        if odd_only and sid not in _ODD_IDS and not (lm.periodic and sid in ("psi_oddA", "psiB_odd")):
            continue
        try:
            u = build_seed(sid, prof, lm, params.epsilon, g)
        except SeedError:
            continue
        push(sid, u)
        push(f"-{sid}", -u)
        if g.symmetric and not odd_only:
            push(f"^{sid}", -u[::-1])
            push(f"-^{sid}", u[::-1].copy())
    return out
