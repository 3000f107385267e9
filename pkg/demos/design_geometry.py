"""
Voronoi geometry of a design
============================

Eigenvalue tail bounds for a design need its Voronoi cells to be regular: the
largest cell diameter times the number of sites should stay bounded. The cells
are rasterised (nearest site on a fine grid, ties to the lower index) to get
areas and diameters.
"""
from lowrank_kriging import K3, grid_design, random_design, voronoi_summary
from lowrank_kriging.kernels import c_delta

for label, design in [("grid 30 x 30", grid_design(30)), ("uniform random, n = 900", random_design(900, seed=7))]:
    v = voronoi_summary(design)
    print(f"{label}: largest diameter {v.delta_max:.4f}, mesh ratio {v.mesh_ratio:.2f}, "
          f"smallest cell area {v.areas.min():.2e}, c(delta_max) = {c_delta(K3, design.domain, v.delta_max):.4f}")
