"""Multi-start enumeration of geodesics with orbit deduplication and a
per-orbit index table."""
from __future__ import annotations

from typing import Optional

import numpy as np

from .errors import CollapsedToConstant, GapNotFound, NoConvergence
from .geodesic import GeodesicSolution, orbit_distance, solve_bvp
from .morse import GapPolicy, hessian, index_nullity
from .pathspace import DiscretePath, IsometryGraph, Periodic


def run_census(metric, initial_paths, grad_tol: float = 1e-9,
               dedupe_tol: float = 1e-4, policy: Optional[GapPolicy] = None,
               compute_index: bool = True):
    """Solve the BVP from each seed, deduplicate by orbit distance, and attach
    (index, nullity) per surviving orbit.  Failures are reported, not raised."""
    policy = policy or GapPolicy()
    orbits = []
    failures = []
    for i, init in enumerate(initial_paths):
        try:
            sol = solve_bvp(metric, init, grad_tol=grad_tol)
        except (NoConvergence, CollapsedToConstant) as exc:
            failures.append({"seed": i, "error": type(exc).__name__, "detail": str(exc)})
            continue
        is_orbit_kind = isinstance(sol.path.bc, (Periodic, IsometryGraph))
        dup = False
        for rec in orbits:
            other = rec["solution"]
            if abs(other.energy - sol.energy) > 1e-6 * max(1.0, abs(other.energy)):
                continue
            d = (orbit_distance(other.path, sol.path) if is_orbit_kind
                 else float(np.linalg.norm(other.path.nodes - sol.path.nodes)
                            / np.sqrt(sol.path.K + 1)))
            if d < dedupe_tol:
                rec["seeds"].append(i)
                dup = True
                break
        if dup:
            continue
        rec = {"solution": sol, "seeds": [i]}
        orbits.append(rec)

    for rec in orbits:
        sol = rec["solution"]
        entry = {
            "energy": sol.energy,
            "speed": sol.speed,
            "residuals": sol.residuals,
            "seeds": rec["seeds"],
        }
        if compute_index:
            try:
                mode = "full" if isinstance(sol.path.bc, (Periodic, IsometryGraph)) else "full"
                spec = hessian(metric, sol, orbit_mode=mode, compute_vectors=False, policy=policy)
                rep = index_nullity(spec, policy)
                entry["index"] = rep.m_minus
                entry["kernel_dim"] = rep.m_zero
                entry["nullity"] = rep.nu
                entry["gap_a"] = rep.a
            except GapNotFound as exc:
                entry["index_error"] = str(exc)
        rec["report"] = entry
    return orbits, failures
