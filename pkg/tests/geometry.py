"""Shared grid checks for the shape of the systematic deviation m/s."""

import numpy as np

from sharkfin.theory import SharkShape, TheoryParams, shark_fin

# second-difference sign tolerance, relative to the curve's magnitude
_CURVE_TOL = 1e-12


def _second_diffs(vals):
    return vals[2:] - 2 * vals[1:-1] + vals[:-2]


def check_fin_geometry(p: TheoryParams, shape: SharkShape, n_nodes: int = 601):
    """Verify the monotonicity/curvature pattern of m/s on a fine grid.

    Returns a list of failed property names (empty when the profile
    matches the claimed shape).
    """
    left = np.linspace(p.c - p.h, p.c, n_nodes)
    right = np.linspace(p.c, p.c + p.h, n_nodes)[1:]
    lam_left = shark_fin(left, p)
    lam_right = shark_fin(right, p)
    tol = _CURVE_TOL * max(np.max(np.abs(lam_left)), np.max(np.abs(lam_right)), 1.0)

    strict_inc = lambda v: bool(np.all(np.diff(v) > 0))
    strict_dec = lambda v: bool(np.all(np.diff(v) < 0))
    concave = lambda v: bool(np.all(_second_diffs(v) <= tol))
    convex = lambda v: bool(np.all(_second_diffs(v) >= -tol))

    expectations = {
        SharkShape.WEST_FIN: [
            ("left strictly increasing", strict_inc(lam_left)),
            ("left concave", concave(lam_left)),
            ("right strictly decreasing", strict_dec(lam_right)),
            ("right convex", convex(lam_right)),
        ],
        SharkShape.EAST_FIN: [
            ("left strictly increasing", strict_inc(lam_left)),
            ("left convex", convex(lam_left)),
            ("right strictly decreasing", strict_dec(lam_right)),
            ("right concave", concave(lam_right)),
        ],
        SharkShape.WEST_FIN_INVERTED: [
            ("left strictly decreasing", strict_dec(lam_left)),
            ("left convex", convex(lam_left)),
            ("right strictly increasing", strict_inc(lam_right)),
            ("right concave", concave(lam_right)),
        ],
        SharkShape.EAST_FIN_INVERTED: [
            ("left strictly decreasing", strict_dec(lam_left)),
            ("left concave", concave(lam_left)),
            ("right strictly increasing", strict_inc(lam_right)),
            ("right convex", convex(lam_right)),
        ],
    }
    return [name for name, ok in expectations[shape] if not ok]
