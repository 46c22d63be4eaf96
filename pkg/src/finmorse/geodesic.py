"""Geodesic solvers: initial-value shooting, boundary-value solving by
H^1-preconditioned descent plus damped Newton on the discrete energy,
boundary-condition residual reports, invariant extension, and iteration."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sl

from .connection import integrate_spray
from .errors import (ClosureViolated, CollapsedToConstant, DegenerateFiberVector,
                     NoConvergence, WrongBoundaryKind)
from .finsler import FinslerMetric, fundamental_tensor
from .manifold import FlatTorus, Identity, Sphere
from .pathspace import (DiscretePath, IsometryGraph, PathChart, Periodic,
                        SubmanifoldPair, _bc_iso, velocity_field)


@dataclass
class GeodesicSolution:
    path: DiscretePath
    metric: FinslerMetric
    energy: float
    speed: float                      # constant F-speed sqrt(c)
    residuals: dict
    converged: bool
    iterations: int = 0

    def to_dict(self) -> dict:
        from .descriptors import metric_to_dict
        from .pathspace import path_to_dict

        d = path_to_dict(self.path)
        d.update({
            "metric": metric_to_dict(self.metric),
            "energy": self.energy,
            "speed": self.speed,
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
        })
        return d


def solution_from_dict(d: dict) -> GeodesicSolution:
    from .descriptors import metric_from_dict
    from .pathspace import path_from_dict

    path = path_from_dict(d)
    metric = metric_from_dict(d["metric"], path.manifold)
    return GeodesicSolution(path, metric, float(d["energy"]), float(d["speed"]),
                            {k: float(v) for k, v in d["residuals"].items()},
                            bool(d["converged"]), int(d.get("iterations", 0)))


# ---------------------------------------------------------------------------
# shooting
# ---------------------------------------------------------------------------


def shoot(metric: FinslerMetric, x, v, T: float, steps: int = 1000,
          record: bool = True):
    """Integrate the geodesic equation; returns (points, velocities) sampled at
    every step when ``record`` else the final state."""
    man = metric.manifold
    if np.linalg.norm(v) < 1e-12:
        raise DegenerateFiberVector("shooting needs a nonzero initial velocity")
    if not record:
        return integrate_spray(metric, x, v, T, steps)
    xs = np.zeros((steps + 1, man.ambient_dim))
    vs = np.zeros_like(xs)
    xs[0], vs[0] = np.asarray(x, float), np.asarray(v, float)
    dt = T / steps
    xc, vc = xs[0], vs[0]
    for i in range(steps):
        xc, vc = integrate_spray(metric, xc, vc, dt, 1)
        xs[i + 1], vs[i + 1] = xc, vc
    return xs, vs


# ---------------------------------------------------------------------------
# boundary-value solver
# ---------------------------------------------------------------------------


def solve_bvp(metric: FinslerMetric, path: DiscretePath,
              grad_tol: float = 1e-9, max_iter: int = 200,
              collapse_energy: float = 1e-10, descent_steps: int = 5,
              verbose: bool = False) -> GeodesicSolution:
    """Critical point of the discrete energy from the given initial path.

    A short phase of H^1-preconditioned gradient steps is followed by damped
    Newton steps on the reduced coefficients; both phases use the H^1 gradient
    norm as merit (geodesics are saddle points in general, so plain energy
    descent would run through them).  The frame chart is rebuilt at the
    current path each iteration.
    """
    path.validate()
    cur = path
    it = 0
    last_res = np.inf
    scale0 = max(1.0, abs(_energy_of(metric, cur)))

    def merit(p):
        c = PathChart(metric, p)
        return c.h1_norm(c.gradient())

    for it in range(1, max_iter + 1):
        chart = PathChart(metric, cur)
        g = chart.gradient()
        gnorm = chart.h1_norm(g)
        E0 = chart.energy()
        if E0 < collapse_energy * scale0:
            raise CollapsedToConstant(f"energy {E0:.3e} below collapse threshold")
        if gnorm <= grad_tol:
            last_res = gnorm
            break
        moved = False
        if it <= descent_steps:
            step = 1.0
            for _ in range(20):
                trial = chart.path_from(-step * g)
                if merit(trial) < gnorm:
                    cur = trial
                    moved = True
                    break
                step *= 0.5
        if not moved:
            B = chart.hessian()
            M = chart.gram()
            evs = sl.eigh(B, M, eigvals_only=True, subset_by_index=[0, 0])
            # near-pure Newton first (quadratic at saddles; the tiny shift only
            # regularizes symmetry kernels), then the strong Tikhonov damping
            for lam in (1e-8, max(0.0, -float(evs[0])) + 1e-8):
                delta = sl.solve(B + lam * M, -chart.differential(), assume_a="sym")
                step = 1.0
                for _ in range(30):
                    trial = chart.path_from(step * delta)
                    if merit(trial) < gnorm:
                        cur = trial
                        moved = True
                        break
                    step *= 0.5
                if moved:
                    break
            if not moved:
                raise NoConvergence(it, gnorm, "no merit decrease along Newton or gradient direction")
        last_res = gnorm
        if verbose:
            print(f"  iter {it:3d}  E={E0:.12g}  |grad|={gnorm:.3e}")
    else:
        raise NoConvergence(it, last_res)

    return _package_solution(metric, cur, last_res, it, grad_tol)


def _energy_of(metric, path):
    from .pathspace import energy

    return energy(metric, path)


def _package_solution(metric, path, gnorm, iters, grad_tol) -> GeodesicSolution:
    E = _energy_of(metric, path)
    speeds = path.node_speeds(metric)
    mean_speed = float(np.mean(speeds))
    drift = float(np.ptp(speeds) / max(mean_speed, 1e-300))
    bres = check_boundary_condition(metric, path)
    ode = _ode_residual(metric, path)
    residuals = {
        "gradient_h1": float(gnorm),
        "speed_drift": drift,
        "boundary": float(bres["residual"]),
        "ode": float(ode),
    }
    return GeodesicSolution(path=path, metric=metric, energy=float(E),
                            speed=float(np.sqrt(max(E, 0.0))), residuals=residuals,
                            converged=bool(gnorm <= grad_tol), iterations=iters)


def _ode_residual(metric, path) -> float:
    """Max norm of the covariant acceleration at interior nodes."""
    from .connection import covariant_derivative

    v = velocity_field(path)
    try:
        acc = covariant_derivative(metric, path.nodes, v, v)
    except DegenerateFiberVector:
        return np.inf
    return float(np.max(np.linalg.norm(acc, axis=1))) if len(acc) else 0.0


# ---------------------------------------------------------------------------
# boundary-condition residuals
# ---------------------------------------------------------------------------


def check_boundary_condition(metric: FinslerMetric, path: DiscretePath) -> dict:
    """Residuals of the natural boundary conditions of the energy functional.

    Submanifold case: max over a tangent basis u of |g_F(gamma, dgamma)[u, dgamma]|
    at each end.  Isometry case: the velocity closure |I_*(dgamma(0)) - dgamma(1)|
    plus the general fundamental-tensor residual.
    """
    man = metric.manifold
    v = velocity_field(path)
    v0, v1 = v[0], v[-1]
    report = {"kind": type(path.bc).__name__}
    iso = _bc_iso(path.bc)
    if iso is not None:
        img = iso.differential(path.nodes[0], v0)
        closure = float(np.linalg.norm(img - v1))
        g0 = fundamental_tensor(metric, path.nodes[0], v0, scale=np.linalg.norm(v0))
        g1 = fundamental_tensor(metric, path.nodes[-1], v1, scale=np.linalg.norm(v1))
        worst = 0.0
        for u in man.frame(path.nodes[0]):
            lhs = g0.apply(u, v0)
            rhs = g1.apply(iso.differential(path.nodes[0], u), v1)
            worst = max(worst, abs(lhs - rhs))
        report.update({"closure": closure, "general": worst,
                       "residual": max(closure, worst)})
        return report
    bc = path.bc
    worst = 0.0
    for (m, node, vel, gv) in ((bc.m0, path.nodes[0], v0, None), (bc.m1, path.nodes[-1], v1, None)):
        basis = m.tangent_basis(man, node)
        if basis.shape[0] == 0:
            continue
        gF = fundamental_tensor(metric, node, vel, scale=np.linalg.norm(vel))
        for u in basis:
            worst = max(worst, abs(gF.apply(u, vel)))
    report.update({"residual": worst})
    return report


# ---------------------------------------------------------------------------
# invariant extension and iteration
# ---------------------------------------------------------------------------


def extend_invariant(path: DiscretePath, iso=None, T: float = 3.0,
                     closure_tol: float = 1e-5, metric: Optional[FinslerMetric] = None):
    """Sample gamma*(t) = I^[t](gamma(t - [t])) on [0, T]; raises
    ClosureViolated when the velocity closure residual is too large."""
    if iso is None:
        iso = _bc_iso(path.bc)
    if iso is None:
        raise WrongBoundaryKind("extension requires a periodic or isometry-graph path")
    if metric is not None:
        rep = check_boundary_condition(metric, path)
        if rep.get("closure", 0.0) > closure_tol * max(1.0, np.linalg.norm(velocity_field(path)[0])):
            raise ClosureViolated(f"velocity closure residual {rep['closure']:.3e}")
    K = path.K
    npts = int(round(T * K))
    ts = np.arange(npts + 1) / K
    nodes = np.array([path.extended_node(i) for i in range(npts + 1)])
    return ts, nodes


def iterate(path: DiscretePath, m: int) -> DiscretePath:
    """m-fold iterate phi_m(gamma)(t) = gamma*(m t) with exact node reuse
    (the result has m*K + 1 nodes and boundary isometry iso^m)."""
    iso = _bc_iso(path.bc)
    if iso is None:
        raise WrongBoundaryKind("iteration requires a periodic or isometry-graph path")
    if m == 1:
        return path.copy_with(path.nodes.copy())
    K = path.K
    nodes = np.array([path.extended_node(i) for i in range(m * K + 1)])
    iso_m = iso.power(m)
    if isinstance(iso_m, Identity):
        bc = Periodic()
    else:
        bc = IsometryGraph(iso_m)
    return DiscretePath(path.manifold, nodes, bc)


def orbit_distance(path_a: DiscretePath, path_b: DiscretePath, shifts: Optional[int] = None) -> float:
    """min over grid shifts s of the rms node distance between a and s.b."""
    from .pathspace import r_action

    K = path_a.K
    shifts = shifts or K
    man = path_a.manifold
    best = np.inf
    for j in range(shifts):
        shifted = r_action(path_b, j / K)
        if isinstance(man, FlatTorus):
            d = np.array([np.linalg.norm(man.log(x, man.unwrap(x, y)))
                          for x, y in zip(path_a.nodes, shifted.nodes)])
        else:
            d = np.linalg.norm(path_a.nodes - shifted.nodes, axis=1)
        best = min(best, float(np.sqrt(np.mean(d ** 2))))
    return best
