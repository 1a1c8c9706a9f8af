"""Solve the donut at a few forcing strengths and print where the kinks sit."""

import warnings

from kinkbench.analysis import classify_kinks
from kinkbench.energy import ProblemParams, default_grid
from kinkbench.minimize import minimize
from kinkbench.profiles import Donut, landmarks, make_profile

prof = make_profile(Donut(0.2))
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    lm = landmarks(prof)

eps = 0.02
for alpha in (0.0, 0.5, 1.0, 2.0):
    p = ProblemParams(eps, alpha)
    g = default_grid(prof, lm, p)
    r = minimize(g, p, prof, lm)
    rep = classify_kinks(r, prof, lm)
    kinds = ", ".join(f"{k.type}@{k.location:+.3f}" for k in rep.kinks) or "none"
    print(f"alpha={alpha:3.1f}  E={r.energy:+.5f}  renorm={r.renorm:.5f}  seed={r.winning_seed:<16} kinks: {kinds}")
