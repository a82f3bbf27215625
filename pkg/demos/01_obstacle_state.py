#!/usr/bin/env python3
"""Solve one obstacle-constrained heat state and look at the contact set.

The benchmark square loses heat through the top/side flux and exchanges
heat with a warm environment along the bottom edge.  A strong sink on the
interior box presses the temperature onto the obstacle u >= 0, so part of
the domain sits exactly at zero: the contact (active) set.
"""

from vicontrol import ProblemData, assemble, build_unit_square, norms, solve_state
from vicontrol.presets import box_control

n = 32
mesh = build_unit_square(n, "bottom")
data = ProblemData(
    alpha=2.0,
    b=1.0,
    q=1.0,
    M_cost=1.0,
    g=box_control(-20.0, 0.25, 0.75, 0.25, 0.75),
)
system = assemble(mesh, data)

robin = solve_state(mesh, system, data, family="robin", cross_check=True)
dirichlet = solve_state(mesh, system, data, family="dirichlet_limit")

print(f"mesh: {mesh.node_count} nodes, {mesh.triangle_count} triangles, h = {mesh.h:.4f}")
for name, rep in (("robin (alpha=2)", robin), ("dirichlet limit", dirichlet)):
    u = rep.values()
    print(f"{name}: {rep.iterations} iterations, residual {rep.residual:.2e}, "
          f"{rep.active_set.size} contact nodes, "
          f"u in [{u.min():.3f}, {u.max():.3f}], V-norm {norms(system, u)['V']:.4f}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(11, 4.5), sharey=True)
    for ax, (name, rep) in zip(axes, (("Robin, alpha=2", robin),
                                      ("Dirichlet limit", dirichlet))):
        t = ax.tripcolor(mesh.nodes[:, 0], mesh.nodes[:, 1], mesh.triangles,
                         rep.values(), shading="gouraud")
        act = rep.active_set
        ax.plot(mesh.nodes[act, 0], mesh.nodes[act, 1], "r.", ms=3, label="contact")
        ax.set_title(name)
        ax.set_aspect("equal")
        fig.colorbar(t, ax=ax)
    axes[0].legend(loc="lower left")
    fig.tight_layout()
    fig.savefig("obstacle_state.png", dpi=130)
    print("wrote obstacle_state.png")
except ImportError:
    print("matplotlib not available; skipping the plot")
