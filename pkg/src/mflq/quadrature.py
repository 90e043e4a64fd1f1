"""Composite Simpson quadrature on uniform grids.

Fourth-order, matching the RK4 integrators, so quadrature never becomes the
dominant error term of a cost evaluation.
"""

from __future__ import annotations

import numpy as np

from .errors import StructuralError


def simpson(values: np.ndarray, h: float) -> float:
    """Composite Simpson integral of node samples with spacing h.

    Requires an even number of intervals (odd number of nodes).
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0] - 1
    if n < 2 or n % 2 != 0:
        raise StructuralError(f"Simpson rule needs an even interval count, got {n}")
    return float(h / 3.0 * (values[0] + values[-1]
                            + 4.0 * values[1:-1:2].sum()
                            + 2.0 * values[2:-1:2].sum()))


def cumulative_simpson(values: np.ndarray, h: float) -> np.ndarray:
    """Running integral at every node, Simpson on interval pairs.

    Even nodes accumulate the classic 1-4-1 panel; odd nodes add the left
    half-panel of the local quadratic, keeping O(h^4) accuracy throughout.
    The final entry equals `simpson` when the interval count is even.
    """
    f = np.asarray(values, dtype=float)
    n = f.shape[0] - 1
    if n < 2:
        raise StructuralError("cumulative Simpson needs at least 2 intervals")
    out = np.zeros(n + 1)
    n_even = n if n % 2 == 0 else n - 1
    a, b, c = f[0:n_even - 1:2], f[1:n_even:2], f[2:n_even + 1:2]
    panels = h / 3.0 * (a + 4.0 * b + c)
    out[2:n_even + 1:2] = np.cumsum(panels)
    # odd nodes: left half-panel of the quadratic through (a, b, c)
    out[1:n_even:2] = out[0:n_even - 1:2] + h / 12.0 * (5.0 * a + 8.0 * b - c)
    if n % 2 != 0:
        # trailing single interval: right half-panel of the last quadratic
        out[n] = out[n - 1] + h / 12.0 * (-f[n - 2] + 8.0 * f[n - 1] + 5.0 * f[n])
    return out
