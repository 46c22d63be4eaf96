"""Finite-dimensional reduction at a critical point or orbit: spectral
splitting of the second variation, Newton solution of the graph map h on the
kernel ball, the reduced functional, and the verifiable consequences of the
splitting normal form."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sl

from .errors import BoundViolated, GapNotFound, NewtonDiverged
from .morse import GapPolicy, HessianSpectrum, cluster_counts, index_nullity
from .pathspace import PathChart


@dataclass
class SpectralSplit:
    spec: HessianSpectrum
    V_minus: np.ndarray          # columns, M-orthonormal, in working coordinates
    V_zero: np.ndarray
    V_plus: np.ndarray
    a0: float
    a1: float

    @property
    def chart(self) -> PathChart:
        return self.spec.chart

    def embed(self, x: np.ndarray) -> np.ndarray:
        """working coordinates -> chart reduced coordinates"""
        return self.spec.basis @ x if self.spec.basis is not None else x

    @property
    def dim(self) -> int:
        return self.spec.B.shape[0]

    def gram(self) -> np.ndarray:
        return self.spec.gram

    def projector(self, which: str) -> np.ndarray:
        V = {"-": self.V_minus, "0": self.V_zero, "+": self.V_plus}[which]
        return V @ (V.T @ self.gram())

    def w_basis(self) -> np.ndarray:
        """Basis of the complement H^- (+) H^+ used by the graph solve."""
        return np.hstack([self.V_minus, self.V_plus])


def spectral_split(spec: HessianSpectrum, policy: Optional[GapPolicy] = None) -> SpectralSplit:
    """Eigenbases of the negative/null/positive subspaces and the gap
    constants; a0 is half the smallest nonzero |eigenvalue|, a1 = a0."""
    policy = policy or GapPolicy()
    if spec.eigenvectors is None:
        raise ValueError("hessian(...) must be called with compute_vectors=True")
    mm, m0, a = cluster_counts(spec.eigenvalues, policy)
    ev = spec.eigenvalues
    order = np.argsort(ev)
    V = spec.eigenvectors[:, order]
    ev = ev[order]
    neg = ev < -a
    zer = np.abs(ev) <= a
    pos = ev > a
    outside = np.abs(ev[~zer])
    a0 = 0.5 * float(outside.min()) if outside.size else 0.0
    return SpectralSplit(spec=spec, V_minus=V[:, neg], V_zero=V[:, zer],
                         V_plus=V[:, pos], a0=a0, a1=a0)


# ---------------------------------------------------------------------------
# the graph map h
# ---------------------------------------------------------------------------


def _point_energy_diff(split: SpectralSplit, x: np.ndarray):
    """(E, dE) at working-coordinate point x, pulled back from the chart."""
    chart = split.chart
    w = split.embed(x)
    E = chart.energy(w)
    dE = chart.differential(w)
    if split.spec.basis is not None:
        dE = split.spec.basis.T @ dE
    return E, dE


def _point_hessian(split: SpectralSplit, x: np.ndarray) -> np.ndarray:
    chart = split.chart
    w = split.embed(x)
    B = chart.hessian(w)
    if split.spec.basis is not None:
        B = split.spec.basis.T @ B @ split.spec.basis
    return B


def solve_h(split: SpectralSplit, xi0: np.ndarray, newton_tol: float = 1e-10,
            max_iter: int = 60, trust: float = 10.0, multistart: int = 0,
            rng=None):
    """Solve (I - P^0) grad(E o EXP)(xi + h(xi)) = 0 for h in H^- (+) H^+.

    xi0: kernel coordinates (coefficients against V_zero).  Returns
    (c, residual) with c the coordinates of h against [V_minus | V_plus];
    the H^1 norm of h is |c|.  Raises NewtonDiverged when the iteration
    leaves the trust ball (the kernel radius is too large).
    """
    W = split.w_basis()
    V0 = split.V_zero
    base = V0 @ np.asarray(xi0, dtype=float)
    scale = max(1.0, float(np.linalg.norm(xi0)))

    def run(c_init):
        c = np.asarray(c_init, dtype=float).copy()
        for _ in range(max_iter):
            x = base + W @ c
            _, dE = _point_energy_diff(split, x)
            f = W.T @ dE
            res = float(np.linalg.norm(f))
            if res <= newton_tol:
                return c, res
            B = _point_hessian(split, x)
            J = W.T @ B @ W
            try:
                step = sl.solve(J, -f, assume_a="sym")
            except sl.LinAlgError:
                raise NewtonDiverged(xi0, "singular reduced Jacobian")
            c = c + step
            if np.linalg.norm(c) > trust * scale:
                raise NewtonDiverged(xi0, "iterate left the trust ball")
        raise NewtonDiverged(xi0, f"no convergence (residual {res:.3e})")

    c, res = run(np.zeros(W.shape[1]))
    if multistart:
        rng = rng or np.random.default_rng(0)
        for _ in range(multistart):
            c2, _ = run(c + 0.1 * np.linalg.norm(c, ord=np.inf) * rng.standard_normal(len(c))
                        if np.linalg.norm(c) > 0 else 1e-3 * rng.standard_normal(len(c)))
            if np.linalg.norm(c2 - c) > 1e-8 * max(1.0, np.linalg.norm(c)):
                raise NewtonDiverged(xi0, "multistart found a second root in the trust ball")
    return c, res


@dataclass
class ReducedFunctional:
    split: SpectralSplit
    delta: float
    grid: np.ndarray             # (npts, m0) kernel coordinates
    h_coords: np.ndarray         # (npts, dim+-) graph coordinates
    h_norms: np.ndarray
    L0_values: np.ndarray
    residuals: np.ndarray
    checks: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "m_minus": int(self.split.V_minus.shape[1]),
            "m_zero": int(self.split.V_zero.shape[1]),
            "a0": self.split.a0,
            "a1": self.split.a1,
            "delta": self.delta,
            "grid": self.grid.tolist(),
            "h_norms": self.h_norms.tolist(),
            "L0_values": self.L0_values.tolist(),
            "residuals": self.residuals.tolist(),
            "checks": self.checks,
        }


def estimate_delta(split: SpectralSplit, rng=None, probes: int = 3,
                   cap: float = 0.1) -> float:
    """delta = min(cap, a0 / (10 * third-order estimate)), the third-order
    scale probed by differencing the Hessian form along random directions."""
    rng = rng or np.random.default_rng(0)
    N = split.dim
    eps = 1e-3
    T = 0.0
    for _ in range(probes):
        u = rng.standard_normal(N)
        u /= np.sqrt(u @ split.gram() @ u)
        Bp = _point_hessian(split, eps * u)
        Bm = _point_hessian(split, -eps * u)
        D = (Bp - Bm) / (2 * eps)
        w = sl.eigh(D, split.gram(), eigvals_only=True)
        T = max(T, abs(w[0]), abs(w[-1]))
    if T == 0.0:
        return cap
    return float(min(cap, split.a0 / (10.0 * T)))


def reduced_functional(split: SpectralSplit, delta: Optional[float] = None,
                       n_radial: int = 4, n_random: int = 4, rng=None,
                       newton_tol: float = 1e-10, max_halvings: int = 8,
                       check_fd: bool = True) -> ReducedFunctional:
    """Sample the reduced functional over a ball in the kernel; delta is
    halved on Newton divergence (at most max_halvings times)."""
    rng = rng or np.random.default_rng(0)
    m0 = split.V_zero.shape[1]
    if delta is None:
        delta = estimate_delta(split, rng)
    pts = [np.zeros(m0)]
    for i in range(m0):
        for r in np.linspace(delta / n_radial, delta, n_radial):
            e = np.zeros(m0)
            e[i] = r
            pts.append(e.copy())
            pts.append(-e)
    for _ in range(n_random):
        u = rng.standard_normal(m0)
        u *= rng.uniform(0.2, 1.0) * delta / np.linalg.norm(u)
        pts.append(u)
    grid = np.asarray(pts)

    for attempt in range(max_halvings + 1):
        try:
            hs, norms, vals, ress = [], [], [], []
            for xi0 in grid:
                c, res = solve_h(split, xi0, newton_tol=newton_tol)
                x = split.V_zero @ xi0 + split.w_basis() @ c
                E, _ = _point_energy_diff(split, x)
                hs.append(c)
                norms.append(float(np.linalg.norm(c)))
                vals.append(E)
                ress.append(res)
            break
        except NewtonDiverged:
            delta *= 0.5
            grid = grid * 0.5
            if attempt == max_halvings:
                raise
    rf = ReducedFunctional(split=split, delta=float(delta), grid=grid,
                           h_coords=np.asarray(hs), h_norms=np.asarray(norms),
                           L0_values=np.asarray(vals), residuals=np.asarray(ress))
    if check_fd:
        rf.checks.update(reduction_checks(split, delta, newton_tol=newton_tol))
    return rf


def reduction_checks(split: SpectralSplit, delta: float, newton_tol: float = 1e-10,
                     fd_step: Optional[float] = None) -> dict:
    """h(0) = 0, dh(0) = 0, grad L0(0) = 0 and the vanishing reduced Hessian,
    all by central finite differences through the Newton graph map."""
    m0 = split.V_zero.shape[1]
    c0, res0 = solve_h(split, np.zeros(m0), newton_tol=newton_tol)
    out = {"h0_norm": float(np.linalg.norm(c0)), "residual0": res0}
    eps = fd_step if fd_step is not None else max(1e-3 * delta, 1e-6)
    c_at = {}

    def L0_and_h(xi0):
        key = tuple(np.round(xi0, 14))
        if key not in c_at:
            c, _ = solve_h(split, xi0, newton_tol=newton_tol)
            x = split.V_zero @ xi0 + split.w_basis() @ c
            E, _ = _point_energy_diff(split, x)
            c_at[key] = (c, E)
        return c_at[key]

    dh = np.zeros((split.w_basis().shape[1], m0))
    gradL0 = np.zeros(m0)
    hessL0 = np.zeros((m0, m0))
    _, E0 = L0_and_h(np.zeros(m0))
    for i in range(m0):
        e = np.zeros(m0)
        e[i] = eps
        cp, Ep = L0_and_h(e)
        cm, Em = L0_and_h(-e)
        dh[:, i] = (cp - cm) / (2 * eps)
        gradL0[i] = (Ep - Em) / (2 * eps)
        hessL0[i, i] = (Ep - 2 * E0 + Em) / eps**2
    for i in range(m0):
        for j in range(i + 1, m0):
            e = np.zeros(m0)
            e[i] = eps
            e[j] = eps
            _, Epp = L0_and_h(e)
            e[j] = -eps
            _, Epm = L0_and_h(e)
            e[i] = -eps
            _, Emm = L0_and_h(e)
            e[j] = eps
            _, Emp = L0_and_h(e)
            hessL0[i, j] = hessL0[j, i] = (Epp - Epm - Emp + Emm) / (4 * eps**2)
    out.update({
        "dh0_norm": float(np.linalg.norm(dh, 2)) if dh.size else 0.0,
        "gradL0_norm": float(np.linalg.norm(gradL0)),
        "hessL0_norm": float(np.linalg.norm(hessL0, 2)) if hessL0.size else 0.0,
        "energy0": float(E0),
        "fd_step": float(eps),
    })
    return out


# ---------------------------------------------------------------------------
# splitting consequences
# ---------------------------------------------------------------------------


def _d2J(split: SpectralSplit, xi0, w_coords, eta_coords) -> float:
    """D_2 J(xi, zeta)[eta] = <(I - P0) grad(E o EXP)(xi + h(xi) + zeta), eta>_1
    in graph coordinates: f(x) . eta for the projected differential."""
    W = split.w_basis()
    x = split.V_zero @ xi0 + W @ w_coords
    _, dE = _point_energy_diff(split, x)
    return float((W.T @ dE) @ eta_coords)


def splitting_consequence_check(split: SpectralSplit, radii=(1e-1, 5e-2, 2.5e-2),
                                n_rays: int = 6, n_pairs: int = 50,
                                newton_starts: int = 20, rng=None,
                                coercivity_slack: float = 0.8,
                                monotonicity_slack: float = 0.9,
                                graph_tol: float = 1e-6,
                                newton_tol: float = 1e-10) -> dict:
    """Desk-scale consequences of the splitting normal form.

    (a) quadratic coercivity on H^+ rays and anti-coercivity on H^- rays with
        constants within the stated slack of a1/2 and a0/2;
    (b) every full critical point found by multi-start Newton inside the ball
        lies on the graph xi + h(xi);
    (c) sampled monotonicity inequalities of the projected differential.
    Raises BoundViolated at the first failing sample.
    """
    rng = rng or np.random.default_rng(0)
    chart = split.chart
    c0 = chart.energy()
    nminus = split.V_minus.shape[1]
    nplus = split.V_plus.shape[1]
    m0 = split.V_zero.shape[1]
    report = {"radii": list(radii), "c": c0, "a0": split.a0, "a1": split.a1}

    # (a) ray coercivity
    ray_stats = []
    for r in radii:
        cplus, cminus = np.inf, -np.inf
        for _ in range(n_rays):
            if nplus:
                u = rng.standard_normal(nplus)
                u /= np.linalg.norm(u)
                x = split.V_plus @ (r * u)
                E, _ = _point_energy_diff(split, x)
                cplus = min(cplus, (E - c0) / r**2)
            if nminus:
                u = rng.standard_normal(nminus)
                u /= np.linalg.norm(u)
                x = split.V_minus @ (r * u)
                E, _ = _point_energy_diff(split, x)
                cminus = max(cminus, (E - c0) / r**2)
        ray_stats.append({"r": r, "plus_min_ratio": cplus, "minus_max_ratio": cminus})
        if nplus and cplus < coercivity_slack * split.a1 / 2.0:
            raise BoundViolated(
                f"H+ coercivity {cplus:.4e} < {coercivity_slack}*a1/2 at r={r}")
        if nminus and cminus > -coercivity_slack * split.a0 / 2.0:
            raise BoundViolated(
                f"H- anti-coercivity {cminus:.4e} > -{coercivity_slack}*a0/2 at r={r}")
    report["rays"] = ray_stats

    # (b) critical points inside the ball sit on the h-graph
    r = radii[0]
    N = split.dim
    M = split.gram()
    found = []
    for _ in range(newton_starts):
        x = rng.standard_normal(N)
        x *= r * rng.uniform(0.2, 1.0) / np.sqrt(x @ M @ x)
        for _ in range(80):
            _, dE = _point_energy_diff(split, x)
            gn = float(np.sqrt(dE @ sl.solve(M, dE, assume_a="pos")))
            if gn <= newton_tol:
                break
            B = _point_hessian(split, x)
            lam = 1e-9
            try:
                step = sl.solve(B + lam * M, -dE, assume_a="sym")
            except sl.LinAlgError:
                break
            if np.linalg.norm(step) > 10 * r:
                step *= 10 * r / np.linalg.norm(step)
            x = x + step
        else:
            continue
        if gn <= newton_tol and float(np.sqrt(x @ M @ x)) <= 2 * r:
            found.append(x)
    dists = []
    for x in found:
        xi0 = split.V_zero.T @ (M @ x)
        if np.linalg.norm(xi0) > split.spec.gap_a * 0 + 10 * r:
            continue
        c, _ = solve_h(split, xi0, newton_tol=newton_tol)
        graph_x = split.V_zero @ xi0 + split.w_basis() @ c
        d = graph_x - x
        dists.append(float(np.sqrt(d @ M @ d)))
    report["critical_points_found"] = len(found)
    report["max_graph_distance"] = max(dists) if dists else 0.0
    if dists and max(dists) > graph_tol:
        raise BoundViolated(f"critical point off the h-graph by {max(dists):.3e}")

    # (c) monotonicity of the projected differential (sampled)
    tau = radii[0]
    worst_i, worst_ii = np.inf, np.inf
    for _ in range(n_pairs):
        xi0 = rng.standard_normal(m0) if m0 else np.zeros(0)
        if m0:
            xi0 *= tau * rng.uniform(0, 1) / max(np.linalg.norm(xi0), 1e-300)
        zc = np.zeros(nminus + nplus)
        if nplus:
            zp = rng.standard_normal(nplus)
            zc[nminus:] = tau * rng.uniform(0, 1) * zp / np.linalg.norm(zp)
        if nminus:
            e1 = rng.standard_normal(nminus) * tau * rng.uniform(0, 1)
            e2 = rng.standard_normal(nminus) * tau * rng.uniform(0, 1)
            w1, w2 = zc.copy(), zc.copy()
            w1[:nminus] = e1
            w2[:nminus] = e2
            eta = np.zeros_like(zc)
            eta[:nminus] = e2 - e1
            lhs = _d2J(split, xi0, w2, eta) - _d2J(split, xi0, w1, eta)
            bound = -split.a0 / 2.0 * np.linalg.norm(e2 - e1) ** 2
            margin = bound * monotonicity_slack - lhs
            worst_i = min(worst_i, margin)
            if lhs > bound * monotonicity_slack + 1e-14:
                raise BoundViolated(f"concavity inequality fails: {lhs:.3e} > {bound:.3e}")
        if nplus:
            eta2 = np.zeros_like(zc)
            if nminus:
                em = rng.standard_normal(nminus) * tau * rng.uniform(0, 1)
                eta2[:nminus] = em
            point = zc + eta2
            direction = zc - eta2
            val = _d2J(split, xi0, point, direction)
            rhs = (split.a1 / 2.0 * np.linalg.norm(zc[nminus:]) ** 2
                   + split.a0 / 2.0 * np.linalg.norm(eta2[:nminus]) ** 2)
            worst_ii = min(worst_ii, val - monotonicity_slack * rhs)
            if val < monotonicity_slack * rhs - 1e-14:
                raise BoundViolated(f"coercivity inequality fails: {val:.3e} < {rhs:.3e}")
    report["monotonicity_margin_i"] = None if worst_i is np.inf else worst_i
    report["monotonicity_margin_ii"] = None if worst_ii is np.inf else worst_ii
    report["pass"] = True
    return report


# ---------------------------------------------------------------------------
# shifting bookkeeping
# ---------------------------------------------------------------------------


def shifting_bookkeeping(spec: HessianSpectrum, reduced: Optional[ReducedFunctional] = None) -> dict:
    """Decidable critical-group patterns from the shifting theorem: the local
    homology of the reduced functional shifted by the Morse index.  Cases:
    nondegenerate, strict local minimum, strict local maximum of L0 on the
    sampled grid; anything else is reported undecided."""
    mm, m0 = spec.m_minus, spec.m_zero
    out = {"m_minus": mm, "m_zero": m0}
    if m0 == 0:
        out["case"] = "nondegenerate"
        out["pattern"] = {f"q={mm}": 1}
        return out
    if reduced is None:
        out["case"] = "undecided (no reduced functional supplied)"
        return out
    vals = reduced.L0_values
    v0 = vals[0]
    others = vals[1:]
    scale = max(abs(v0), 1.0)
    if others.size and np.all(others > v0 + 1e-10 * scale):
        out["case"] = "strict local minimum of L0"
        out["pattern"] = {f"q={mm}": 1}
    elif others.size and np.all(others < v0 - 1e-10 * scale):
        out["case"] = "strict local maximum of L0"
        out["pattern"] = {f"q={mm + m0}": 1}
    else:
        out["case"] = "undecided at desk scale"
    return out
