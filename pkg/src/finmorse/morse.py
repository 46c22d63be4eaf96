"""Second variation, operator splitting, Morse index/nullity, Jacobi
monodromy, and the Bott-type iteration functions with their identities.

Two independent Hessian routes are provided: the exact Hessian of the
discrete energy in the frame chart, and the geometric second-variation form
assembled from covariant derivatives and the curvature operator.  Index and
nullity are read off generalized eigenvalues against the discrete H^1 Gram
under an auditable zero-cluster policy.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sl

from . import _kernels as kr
from .errors import DegenerateCurve, GapNotFound, WrongBoundaryKind
from .finsler import FinslerMetric, RiemannianSquareRoot
from .geodesic import GeodesicSolution, iterate, solve_bvp
from .manifold import EuclideanSpace, FlatTorus, Identity, Sphere
from .pathspace import (DiscretePath, PathChart, _bc_iso, parallel_frame,
                        velocity_field)


@dataclass(frozen=True)
class GapPolicy:
    """Zero-eigenvalue clustering: eigenvalues with |l| <= a are the kernel
    cluster, where a = max(floor, tau * smallest |eigenvalue| above floor);
    refuse when the jump ratio across the cluster edge is below min_ratio.
    ``force_dim`` overrides clustering with a fixed kernel dimension (used by
    orbit-mode reduction when the symmetry is only approximate); ``abs_zero``
    replaces the floor for quasi-periodic Jacobi problems whose discrete
    kernels are offset by the O(h^2) stencil bias."""

    floor: float = 1e-7
    tau: float = 0.1
    min_ratio: float = 10.0
    force_dim: Optional[int] = None
    abs_zero: Optional[float] = None


def cluster_counts(eigs: np.ndarray, policy: GapPolicy):
    """(m_minus, m_zero, a) for a sorted or unsorted eigenvalue array."""
    eigs = np.sort(np.asarray(eigs, dtype=float))
    absv = np.abs(eigs)
    if policy.force_dim is not None:
        k = policy.force_dim
        order = np.argsort(absv)
        if k == 0:
            a = 0.5 * absv[order[0]] if len(eigs) else 0.0
        else:
            inner = absv[order[k - 1]]
            outer = absv[order[k]] if k < len(eigs) else np.inf
            a = np.sqrt(max(inner, 1e-300) * min(outer, 1e300)) if np.isfinite(outer) else 2 * inner
        m0 = int(np.sum(absv <= a))
        mm = int(np.sum(eigs < -a))
        return mm, m0, float(a)
    floor = policy.abs_zero if policy.abs_zero is not None else policy.floor
    above = absv[absv > floor]
    if above.size == 0:
        return 0, len(eigs), float(floor)
    lam_gap = float(above.min())
    a = max(floor, policy.tau * lam_gap)
    cluster = absv <= a
    m0 = int(np.sum(cluster))
    if m0 > 0:
        top = float(absv[cluster].max())
        ratio = lam_gap / max(top, 1e-300)
        if ratio < policy.min_ratio:
            raise GapNotFound(
                f"eigenvalue ratio {ratio:.2f} across the zero cluster below {policy.min_ratio}"
            )
    mm = int(np.sum(eigs < -a))
    return mm, m0, float(a)


@dataclass
class HessianSpectrum:
    solution: GeodesicSolution
    chart: PathChart
    B: np.ndarray
    P_part: np.ndarray
    Q_part: np.ndarray
    gram: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray]
    orbit_mode: str                      # 'full' | 'normal'
    basis: Optional[np.ndarray]          # reduction basis for 'normal' mode
    m_minus: int = 0
    m_zero: int = 0
    gap_a: float = 0.0
    route: str = "chart"

    @property
    def p_min_eig(self) -> float:
        return float(sl.eigh(self.P_part, self.gram, eigvals_only=True, subset_by_index=[0, 0])[0])


def _orbit_complement_basis(chart: PathChart) -> np.ndarray:
    """Orthonormal basis (columns) of the M-orthogonal complement of the
    orbit direction in reduced coordinates."""
    z0 = chart.tangent_direction()
    M = chart.gram()
    u = M @ z0
    u = u / np.linalg.norm(u)
    n = len(u)
    # Householder reflector mapping u -> e_0; its trailing columns span u-perp
    v = u.copy()
    v[0] += np.sign(u[0]) if u[0] != 0 else 1.0
    v /= np.linalg.norm(v)
    H = np.eye(n) - 2.0 * np.outer(v, v)
    return H[:, 1:]


def hessian(metric: FinslerMetric, solution: GeodesicSolution,
            orbit_mode: str = "full", route: str = "chart",
            policy: Optional[GapPolicy] = None,
            compute_vectors: bool = True) -> HessianSpectrum:
    """Second-variation spectrum at a converged solution.

    route 'chart' assembles the exact Hessian of the discrete energy; route
    'geometric' assembles the covariant-derivative/curvature form (Riemannian
    background only).  orbit_mode 'normal' projects out the orbit direction.
    """
    chart = PathChart(metric, solution.path)
    if route == "chart":
        B, P = chart.hessian_and_pform()
    elif route == "geometric":
        B = geometric_hessian_form(metric, solution, chart)
        _, P = chart.hessian_and_pform()
    else:
        raise ValueError(route)
    M = chart.gram()
    Q = B - P

    basis = None
    if orbit_mode == "normal":
        basis = _orbit_complement_basis(chart)
        Br = basis.T @ B @ basis
        Pr = basis.T @ P @ basis
        Qr = basis.T @ Q @ basis
        Mr = basis.T @ M @ basis
    elif orbit_mode == "full":
        Br, Pr, Qr, Mr = B, P, Q, M
    else:
        raise ValueError(orbit_mode)

    if compute_vectors:
        evals, evecs = sl.eigh(Br, Mr)
    else:
        evals = sl.eigh(Br, Mr, eigvals_only=True)
        evecs = None
    spec = HessianSpectrum(solution=solution, chart=chart, B=Br, P_part=Pr, Q_part=Qr,
                           gram=Mr, eigenvalues=np.asarray(evals), eigenvectors=evecs,
                           orbit_mode=orbit_mode, basis=basis, route=route)
    mm, m0, a = cluster_counts(spec.eigenvalues, policy or GapPolicy())
    spec.m_minus, spec.m_zero, spec.gap_a = mm, m0, a
    return spec


def geometric_hessian_form(metric: FinslerMetric, solution: GeodesicSolution,
                           chart: Optional[PathChart] = None) -> np.ndarray:
    """Second variation per the covariant form:
    2 * sum_j h [ Dxi_j . Deta_j - <Rhat_j xibar_j, etabar_j> ]
    in the parallel frame (Riemannian background metrics)."""
    if not isinstance(metric, RiemannianSquareRoot):
        raise NotImplementedError("geometric route implemented for Riemannian metrics")
    chart = chart or PathChart(metric, solution.path)
    man = metric.manifold
    K, n, h = chart.K, chart.n, chart.h
    frames = chart.frames
    # midpoint velocities in frame coefficients
    if isinstance(man, Sphere):
        Kc = 1.0 / man.radius**2
    else:
        Kc = 0.0
    N = (K + 1) * n
    B = np.zeros((N, N))
    nodes = solution.path.nodes
    for j in range(K):
        if isinstance(man, FlatTorus):
            a_, b_ = chart.bases[j], chart.bases[j + 1]
            v = (b_ - a_) / h
            m = None
        elif isinstance(man, EuclideanSpace):
            v = (nodes[j + 1] - nodes[j]) / h
            m = None
        else:
            m = man.midpoint(nodes[j], nodes[j + 1])
            v = (man.log(m, nodes[j + 1]) - man.log(m, nodes[j])) / h
        w = 0.5 * (frames[j] @ v + frames[j + 1] @ v)
        Rhat = Kc * ((v @ v) * np.eye(n) - np.outer(w, w))
        s0, s1 = slice(j * n, (j + 1) * n), slice((j + 1) * n, (j + 2) * n)
        D = np.eye(n) / h
        mass = 0.25 * h * Rhat
        B[s0, s0] += D - mass
        B[s1, s1] += D - mass
        B[s0, s1] += -D - mass
        B[s1, s0] += -D - mass
    B = 2.0 * B
    return kr.reduce_form(chart.T, 0.5 * (B + B.T))


@dataclass
class IndexReport:
    m_minus: int
    m_zero: int
    a: float
    orbit_mode: str
    convention: str
    nu: Optional[int] = None   # full-space kernel minus one, closed orbits

    def as_dict(self):
        return {"m_minus": self.m_minus, "m_zero": self.m_zero, "a": self.a,
                "orbit_mode": self.orbit_mode, "convention": self.convention,
                "nu": self.nu}


def index_nullity(spec: HessianSpectrum, policy: Optional[GapPolicy] = None) -> IndexReport:
    mm, m0, a = cluster_counts(spec.eigenvalues, policy or GapPolicy())
    if spec.orbit_mode == "full":
        conv = "full-space kernel; nu = kernel dim minus one for closed orbits"
        nu = m0 - 1 if m0 >= 1 else 0
    else:
        conv = "normal-bundle counts"
        nu = m0
    return IndexReport(m_minus=mm, m_zero=m0, a=a, orbit_mode=spec.orbit_mode,
                       convention=conv, nu=nu)


# ---------------------------------------------------------------------------
# adapted frames, Jacobi data
# ---------------------------------------------------------------------------


@dataclass
class JacobiData:
    frames: np.ndarray        # adapted parallel frame, e_1 = velocity direction
    E_normal: np.ndarray      # twist matrix on the normal block
    blocks: list
    Rhat_mid: np.ndarray      # (K, n-1, n-1) curvature matrix at segment midpoints
    speed: float


def jacobi_data(metric: FinslerMetric, solution: GeodesicSolution, iso=None) -> JacobiData:
    """Parallel normal frame, normal twist matrix, and curvature entries of
    the Jacobi operator along a closed/invariant geodesic."""
    path = solution.path
    if iso is None:
        iso = _bc_iso(path.bc)
    if iso is None:
        raise WrongBoundaryKind("Jacobi machinery needs a closed or invariant geodesic")
    man = metric.manifold
    tf = parallel_frame(path, iso, adapted_velocity=True, normal_form=False)
    E = tf.E
    if abs(E[0, 0] - 1.0) > 1e-6 or np.abs(E[0, 1:]).max() > 1e-6:
        raise DegenerateCurve("velocity closure fails; twist does not split")
    EN = E[1:, 1:]
    U, _, Vt = np.linalg.svd(EN)
    EN = U @ Vt
    from .pathspace import _normal_form

    blocks, p, Xi = _normal_form(EN)
    frames = tf.frames.copy()
    frames[:, 1:, :] = np.einsum("ab,kbm->kam", Xi.T, frames[:, 1:, :])
    ENn = Xi.T @ EN @ Xi

    K = path.K
    n = man.intrinsic_dim
    Rhat = np.zeros((K, n - 1, n - 1))
    if isinstance(metric, RiemannianSquareRoot) and isinstance(man, Sphere):
        Kc = 1.0 / man.radius**2
        for j in range(K):
            m = man.midpoint(path.nodes[j], path.nodes[j + 1])
            v = (man.log(m, path.nodes[j + 1]) - man.log(m, path.nodes[j])) / path.h
            Rhat[j] = Kc * (v @ v) * np.eye(n - 1)
    elif isinstance(metric, RiemannianSquareRoot):
        pass  # flat: zero curvature
    else:
        from .connection import curvature_R

        vel = velocity_field(path)
        for j in range(K):
            m = path.nodes[j]
            v = vel[j]
            F = frames[j]
            # entries <R(e_a, v) v, e_b> = <R^v(v, e_a) v ...>: use the
            # curvature symmetry g(R(v, u)w, v)-form via R^y(y, u)w
            for a_ in range(1, n):
                Rv = curvature_R(metric, m, v, F[a_], v)
                for b_ in range(1, n):
                    Rhat[j, a_ - 1, b_ - 1] = F[b_] @ Rv
    return JacobiData(frames=frames, E_normal=ENn, blocks=blocks, Rhat_mid=Rhat,
                      speed=solution.speed)


def jacobi_monodromy(metric: FinslerMetric, solution: GeodesicSolution, iso=None,
                     substeps: int = 8) -> dict:
    """Propagate the first-order Jacobi system over one period in the parallel
    normal frame and compose with the inverse twist.

    Returns the twisted monodromy map on (xi(0), Dxi(0)) data and its
    eigenstructure."""
    jd = jacobi_data(metric, solution, iso)
    K = solution.path.K
    h = solution.path.h
    d = jd.Rhat_mid.shape[1]
    Phi = np.eye(2 * d)

    def rhs(R, S):
        # S = [X; V] blocks: X' = V, V' = -R X
        X, V = S[:d], S[d:]
        return np.vstack([V, -R @ X])

    for j in range(K):
        R = jd.Rhat_mid[j]
        dt = h / substeps
        for _ in range(substeps):
            k1 = rhs(R, Phi)
            k2 = rhs(R, Phi + 0.5 * dt * k1)
            k3 = rhs(R, Phi + 0.5 * dt * k2)
            k4 = rhs(R, Phi + dt * k3)
            Phi = Phi + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    W = sl.block_diag(jd.E_normal, jd.E_normal)
    M_twist = W.T @ Phi
    evals = np.linalg.eigvals(M_twist)
    return {"monodromy": Phi, "M_twist": M_twist, "eigenvalues": evals,
            "E_normal": jd.E_normal, "blocks": jd.blocks}


def monodromy_kernel_dim(M_twist: np.ndarray, w: complex, tol: float = 1e-6) -> int:
    """Geometric multiplicity of eigenvalue w of the twisted monodromy."""
    A = M_twist - w * np.eye(M_twist.shape[0])
    s = np.linalg.svd(A, compute_uv=False)
    scale = max(float(s[0]), 1.0)
    return int(np.sum(s <= tol * scale))


# ---------------------------------------------------------------------------
# Bott-type functions
# ---------------------------------------------------------------------------


def _twisted_jacobi_counts(jd: JacobiData, K: int, w: complex,
                           policy: GapPolicy, kappa_basis: Optional[np.ndarray] = None):
    """Negative/zero counts of the Jacobi form on [0,1] under the boundary
    condition xi(1) = w * E_N xi(0), optionally restricted to an invariant
    coordinate subspace (columns of kappa_basis)."""
    h = 1.0 / K
    d = jd.Rhat_mid.shape[1]
    V = kappa_basis if kappa_basis is not None else np.eye(d)
    dv = V.shape[1]
    N = (K + 1) * dv
    B = np.zeros((N, N), dtype=complex)
    Mass = np.zeros((N, N), dtype=complex)
    Dmat = np.eye(dv) / h
    for j in range(K):
        R = V.conj().T @ jd.Rhat_mid[j] @ V
        s0, s1 = slice(j * dv, (j + 1) * dv), slice((j + 1) * dv, (j + 2) * dv)
        mass = 0.25 * h * R
        B[s0, s0] += Dmat - mass
        B[s1, s1] += Dmat - mass
        B[s0, s1] += -Dmat - mass
        B[s1, s0] += -Dmat - mass
        # node-mass L2 Gram (trapezoid)
        Mass[s0, s0] += 0.5 * h * np.eye(dv)
        Mass[s1, s1] += 0.5 * h * np.eye(dv)
    # fold the twisted constraint xi_K = w EN xi_0
    EN = V.conj().T @ jd.E_normal @ V
    Tc = np.zeros(((K + 1) * dv, K * dv), dtype=complex)
    for j in range(K):
        Tc[j * dv:(j + 1) * dv, j * dv:(j + 1) * dv] = np.eye(dv)
    Tc[K * dv:(K + 1) * dv, 0:dv] = w * EN
    Br = Tc.conj().T @ B @ Tc
    Mr = Tc.conj().T @ Mass @ Tc
    Br = 0.5 * (Br + Br.conj().T)
    Mr = 0.5 * (Mr + Mr.conj().T)
    evals = sl.eigh(Br, Mr, eigvals_only=True)
    maxR = max(1.0, max(float(np.linalg.norm(R, 2)) for R in jd.Rhat_mid)) if K else 1.0
    pol = GapPolicy(floor=policy.floor, tau=policy.tau, min_ratio=policy.min_ratio,
                    abs_zero=policy.abs_zero if policy.abs_zero is not None
                    else h**2 * (1.0 + maxR) ** 2 / 3.0)
    mm, m0, a = cluster_counts(np.real(evals), pol)
    return mm, m0, a


def bott_profile(metric: FinslerMetric, solution: GeodesicSolution, iso=None,
                 w_list=None, policy: Optional[GapPolicy] = None):
    """The classical-style Bott functions w -> (Lambda(w), N(w)) of the
    omega-twisted Jacobi problem on the prime interval."""
    policy = policy or GapPolicy()
    jd = jacobi_data(metric, solution, iso)
    K = solution.path.K
    if w_list is None:
        w_list = np.exp(1j * np.linspace(0, 2 * np.pi, 65)[:-1])
    rows = []
    for w in w_list:
        mm, m0, a = _twisted_jacobi_counts(jd, K, complex(w), policy)
        rows.append({"w": complex(w), "Lambda": mm, "N": m0, "a": a})
    return rows, jd


@dataclass
class BottTable:
    alpha: int
    z: complex
    entries: list                  # per rho: {rho, Lambda, N}
    poincare_points: list
    kappas: list

    def as_dict(self):
        return {
            "alpha": self.alpha,
            "z": [self.z.real, self.z.imag],
            "entries": [{"rho": [e["rho"].real, e["rho"].imag],
                         "Lambda": e["Lambda"], "N": e["N"]} for e in self.entries],
            "poincare_points": [[p.real, p.imag] for p in self.poincare_points],
        }


def least_period(path: DiscretePath, iso=None, tol: float = 1e-8) -> int:
    """Smallest integer a with gamma*(t+a) = gamma*(t), i.e. iso^a fixes the
    curve pointwise."""
    if iso is None:
        iso = _bc_iso(path.bc)
    order = iso.order
    if order is None:
        raise WrongBoundaryKind("least integer period needs a finite-order isometry")
    man = path.manifold
    for a in range(1, order + 1):
        if order % a:
            continue
        pw = iso.power(a)
        ok = True
        for j in range(0, path.K, max(1, path.K // 8)):
            img = pw.apply(path.nodes[j])
            d = (np.linalg.norm(man.log(path.nodes[j], man.unwrap(path.nodes[j], img)))
                 if isinstance(man, FlatTorus) else np.linalg.norm(img - path.nodes[j]))
            if d > tol:
                ok = False
                break
        if ok:
            return a
    raise WrongBoundaryKind("curve is not closed under any power of the isometry")


def _mono_subspaces(EN: np.ndarray, alpha: int):
    """Eigen-decomposition of E_N^alpha into (kappa, orthonormal basis)."""
    Mm = np.linalg.matrix_power(EN, alpha).astype(complex)
    evals, evecs = np.linalg.eig(Mm)
    groups = []
    used = np.zeros(len(evals), dtype=bool)
    for i in range(len(evals)):
        if used[i]:
            continue
        sel = np.abs(evals - evals[i]) < 1e-8
        used |= sel
        V = evecs[:, sel]
        q, _ = np.linalg.qr(V)
        groups.append((complex(evals[i] / abs(evals[i])), q))
    return groups


def bott_functions(metric: FinslerMetric, solution: GeodesicSolution, iso=None,
                   z: complex = 1.0 + 0.0j, rho_grid=None,
                   policy: Optional[GapPolicy] = None) -> BottTable:
    """Lambda^z(rho) and N^z(rho): counts of the complexified Jacobi operator
    under the rho-quasi-periodic, z-twisted boundary identifications.

    For a curve of integer least period alpha the joint conditions force
    rho = z^{-alpha} kappa over the eigenvalues kappa of the alpha-fold
    normal twist; at those rho the counts are the z^{-1}-twisted prime-interval
    counts restricted to the kappa block, elsewhere they vanish.
    """
    policy = policy or GapPolicy()
    if iso is None:
        iso = _bc_iso(solution.path.bc)
    alpha = least_period(solution.path, iso)
    jd = jacobi_data(metric, solution, iso)
    K = solution.path.K
    groups = _mono_subspaces(jd.E_normal, alpha)
    z = complex(z)
    if rho_grid is None:
        rho_grid = np.exp(1j * np.linspace(0, 2 * np.pi, 33)[:-1])
    entries = []
    poincare = []
    for rho in rho_grid:
        rho = complex(rho)
        lam_tot, n_tot = 0, 0
        for kappa, Vk in groups:
            target = z ** (-alpha) * kappa
            if abs(rho - target) < 1e-9:
                mm, m0, _ = _twisted_jacobi_counts(jd, K, np.conj(z), policy, kappa_basis=Vk)
                lam_tot += mm
                n_tot += m0
        entries.append({"rho": rho, "Lambda": lam_tot, "N": n_tot})
        if n_tot > 0:
            poincare.append(rho)
    return BottTable(alpha=alpha, z=z, entries=entries, poincare_points=poincare,
                     kappas=[g[0] for g in groups])


# ---------------------------------------------------------------------------
# iteration identities
# ---------------------------------------------------------------------------


def _roots_of(value: complex, order: int) -> np.ndarray:
    base = np.angle(value) / order
    return np.exp(1j * (base + 2.0 * np.pi * np.arange(order) / order))


def iterate_index(metric: FinslerMetric, solution: GeodesicSolution, iso=None,
                  m_max: int = 5, policy: Optional[GapPolicy] = None,
                  polish_tol: float = 1e-9) -> dict:
    """Direct indices of the iterated geodesic versus the root-of-unity sums
    of the Bott functions, and the growth-dichotomy fit.

    For iso = identity the family is the classical m-fold iterate; for a
    finite-order isometry it is the (m*alpha+1)-iterate family.
    """
    policy = policy or GapPolicy()
    if iso is None:
        iso = _bc_iso(solution.path.bc)
    jd = jacobi_data(metric, solution, iso)
    K = solution.path.K
    alpha = least_period(solution.path, iso)
    classical = isinstance(iso, Identity)
    groups = _mono_subspaces(jd.E_normal, alpha)

    rows = []
    for m in range(1, m_max + 1):
        tau = m if classical else m * alpha + 1
        it_path = iterate(solution.path, tau)
        it_sol = _as_solution(metric, it_path, polish_tol)
        spec = hessian(metric, it_sol, orbit_mode="full", compute_vectors=False, policy=policy)
        rep = index_nullity(spec, policy)
        lam_dir, nu_dir = rep.m_minus, rep.nu

        lam_sum, nu_sum = 0, 0
        if classical:
            for rho in _roots_of(1.0 + 0j, m):
                mm, m0, _ = _twisted_jacobi_counts(jd, K, rho, policy)
                lam_sum += mm
                nu_sum += m0
        else:
            for kappa, Vk in groups:
                for rho in _roots_of(kappa, tau):
                    w = rho ** (-m)
                    mm, m0, _ = _twisted_jacobi_counts(jd, K, w, policy, kappa_basis=Vk)
                    lam_sum += mm
                    nu_sum += m0
        rows.append({"m": m, "tau": tau, "lambda_direct": lam_dir, "lambda_sum": lam_sum,
                     "nu_direct": nu_dir, "nu_sum": nu_sum})

    lams = np.array([r["lambda_direct"] for r in rows], dtype=float)
    ms = np.array([r["m"] for r in rows], dtype=float)
    if np.all(lams == 0):
        branch = "all-zero"
        slope = 0.0
        intercept = 0.0
    else:
        A = np.vstack([ms, np.ones_like(ms)]).T
        slope, intercept = np.linalg.lstsq(A, lams, rcond=None)[0]
        branch = "affine-growth"
    return {"rows": rows, "alpha": alpha, "family": "m" if classical else "m*alpha+1",
            "dichotomy": {"branch": branch, "epsilon": float(slope), "offset": float(-intercept)}}


def _as_solution(metric, path, polish_tol) -> GeodesicSolution:
    chart = PathChart(metric, path)
    g = chart.gradient()
    gnorm = chart.h1_norm(g)
    if gnorm > polish_tol:
        return solve_bvp(metric, path, grad_tol=polish_tol, descent_steps=0)
    from .geodesic import _package_solution

    return _package_solution(metric, path, gnorm, 0, polish_tol)
