#!/usr/bin/env python3
"""Measure the nodal interpolation error orders for a smooth function.

Piecewise-linear interpolation of a smooth function loses order one per
derivative: the L2 error shrinks like h^2 and the full H1 error like h.
"""

from vicontrol import interp_rate_study

tables = interp_rate_study(
    lambda x, y: x * x,
    lambda x, y: (2.0 * x, 0.0),
    levels=(4, 8, 16, 32, 64),
)

for tag, expected in (("H", 2.0), ("V", 1.0)):
    table = tables[tag]
    print(f"{tag}-norm errors of interpolating x^2:")
    for h, err, _ in table.rows:
        print(f"  h = {h:.5f}   error = {err:.6e}")
    print(f"  fitted order {table.fitted_order:.3f} (expected about {expected})\n")
