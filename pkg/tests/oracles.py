"""Independent dense-mesh oracle for cycle integrals."""

import numpy as np
from scipy.integrate import simpson


def dense_cycle_integral(cov, cycle, f=None, pts=8001):
    """Composite Simpson of f(x, y) dx on every cut-free piece of the cycle.

    Piece ends lie on cuts, where the sheet function takes the other side's value,
    so the end nodes are nudged inward. f defaults to y (the differential v).
    """
    t = np.linspace(0, 1, pts)
    tt = t.copy()
    tt[0], tt[-1] = 1e-13, 1 - 1e-13
    total = 0j
    for coef, verts, sheet in cycle.components:
        pieces, _ = cov.split_path(list(verts), sheet)
        for a, b, s in pieces:
            x = a + (b - a) * tt
            y = cov.y(x, s)
            vals = y if f is None else f(x, y)
            total += coef * simpson(vals * (b - a), x=t)
    return total
