"""Landmarks, thresholds and the renormalized-energy bound for the stock profiles."""

import math
import warnings

from kinkbench.profiles import Donut, DoubleGaussian, PeriodicCosine, landmarks, make_profile, renorm_bound, thresholds

specs = {
    "donut": Donut(0.2),
    "double gaussian": DoubleGaussian(1.2, 0.05),
    "cosine": PeriodicCosine(2 * math.pi, 1.0, 0.5),
}

for name, spec in specs.items():
    prof = make_profile(spec)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lm = landmarks(prof)
    th = thresholds(prof, lm)
    print(f"{name}")
    print(f"  landmarks   {lm}")
    print(f"  thresholds  {th}")
    if lm.period is None:
        bounds = [round(renorm_bound(lm, th, a), 4) for a in (0.0, 1.0, 2.0, 3.0)]
        print(f"  bound at alpha 0,1,2,3: {bounds}")
