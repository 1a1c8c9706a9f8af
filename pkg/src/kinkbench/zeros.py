from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GRAZE_FRACTION = 1e-3


@dataclass(frozen=True)
class ZeroSet:
    zeros: tuple
    signs: tuple  # sign of u on each segment, len(zeros) + 1 entries
    grazing: tuple = field(default=())

    def __len__(self):
        return len(self.zeros)


def find_zeros(u, x, *, periodic: bool = False) -> ZeroSet:
    """Sign changes of a nodal field, located by linear interpolation.

    Nodes where u vanishes exactly are skipped over, so a crossing through a
    node counts once and a pinned Dirichlet end is not a zero.  Near-zeros
    without a sign change (|u| dipping below 1e-3 sup|u|) are reported apart.
    On periodic grids the last node duplicates the first and is ignored; the
    wrap-around cell is checked too.
    """
    u = np.asarray(u, dtype=float)
    x = np.asarray(x, dtype=float)
    if periodic:
        period = x[-1] - x[0]
        x_lo = float(x[0])
        u, x = u[:-1], x[:-1]
    sup = float(np.max(np.abs(u))) if u.size else 0.0
    if sup == 0.0:
        return ZeroSet((), (0,), ())
    nz = np.flatnonzero(u != 0.0)
    if periodic:
        # rotate so that the scan starts on a nonzero node
        start = nz[0]
        u = np.roll(u, -start)
        x = np.concatenate([x[start:], x[:start] + period])
        u = np.append(u, u[0])
        x = np.append(x, x[0] + period)
        nz = np.flatnonzero(u != 0.0)
    zeros, signs = [], [int(np.sign(u[nz[0]]))]
    for a, b in zip(nz[:-1], nz[1:]):
        if u[a] * u[b] < 0.0:
            if b == a + 1:
                # written so that mirrored data give exactly the mirrored zero
                z = (x[a] * u[b] - x[b] * u[a]) / (u[b] - u[a])
            else:
                z = 0.5 * (x[a + 1] + x[b - 1])
            zeros.append(float(z))
            signs.append(int(np.sign(u[b])))
    if periodic:
        # map back into the original period window and order from its left edge
        zeros = [float(((z - x_lo) % period) + x_lo) for z in zeros]
        order = np.argsort(zeros)
        zeros = [zeros[i] for i in order]
        signs = [signs[0]] * (len(zeros) + 1) if not zeros else _periodic_signs(u, x, zeros, x_lo, period)
    # grazing: local minima of |u| below the floor without a sign change
    au = np.abs(u)
    floor = GRAZE_FRACTION * sup
    interior = np.arange(1, au.size - 1)
    dips = interior[(au[1:-1] <= au[:-2]) & (au[1:-1] <= au[2:]) & (au[1:-1] < floor) & (au[1:-1] > 0)]
    graze = []
    for i in dips:
        if u[i - 1] * u[i + 1] > 0.0:
            graze.append(float(x[i]))
    return ZeroSet(tuple(zeros), tuple(signs), tuple(graze))


def _periodic_signs(u, x, zeros, x_lo, period):
    # sign on each arc between consecutive zeros, read off the rotated samples
    xs = ((x - x_lo) % period) + x_lo
    bounds = [x_lo] + list(zeros) + [x_lo + period]
    out = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        inside = (xs > a) & (xs < b) & (u != 0.0)
        if not inside.any():
            out.append(0)
            continue
        out.append(int(np.sign(u[inside][np.argmax(np.abs(u[inside]))])))
    return out
