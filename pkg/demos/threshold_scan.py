"""Bisect for the forcing at which the donut's outer zeros jump to the inner landmarks."""

import warnings

from kinkbench.analysis import estimate_threshold
from kinkbench.profiles import Donut

# the donut is degenerate at the origin by design
warnings.simplefilter("ignore", UserWarning)

for eps in (0.04, 0.02):
    est = estimate_threshold(Donut(0.2), eps, (1.0, 2.0), "outer_zero_jump", width=0.02)
    print(f"eps={eps}: alpha in [{est.alpha_lo:.4f}, {est.alpha_hi:.4f}], "
          f"closed form {est.closed_form:.4f}, gap {est.relative_gap:.2%}")
