"""Discretized H^1 curve spaces: nodal paths, boundary conditions, parallel
frames with the twist matrix, the discrete energy, inner products, and both
gradient realizations.

A path is a node array on the manifold.  All variational calculus happens in
the chart of a parallel orthonormal frame along the path: perturbations are
coefficient fields xi_j in R^n, the perturbed path has nodes
exp_{gamma_j}(sum_i xi_{j,i} e_i(t_j)), and the energy is the midpoint-rule
quadrature of F^2 over segments.  Boundary conditions are eliminated exactly
by a sparse reduction map, so gradients and Hessians of the reduced energy
are consistent with the discrete energy to machine precision.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sl
import scipy.sparse as sp

from . import _kernels as kr
from .errors import DegenerateCurve, WrongBoundaryKind
from .finsler import FinslerMetric
from .manifold import FlatTorus, Identity, Isometry, ManifoldModel, Sphere

# ---------------------------------------------------------------------------
# boundary conditions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FixedPoint:
    """Single-point submanifold."""

    point: tuple

    def contains(self, man, x, tol=1e-8) -> bool:
        return bool(np.linalg.norm(man.log(np.asarray(self.point), x)) <= tol)

    def tangent_basis(self, man, x) -> np.ndarray:
        return np.zeros((0, man.ambient_dim))


@dataclass(frozen=True)
class SubTorus:
    """base + span(directions) inside a flat torus (totally geodesic)."""

    base: tuple
    directions: tuple  # rows: ambient direction vectors

    def _dirs(self):
        D = np.atleast_2d(np.asarray(self.directions, dtype=float))
        Q, _ = np.linalg.qr(D.T)
        return Q.T

    def contains(self, man, x, tol=1e-8) -> bool:
        d = man.log(np.asarray(self.base), x)
        D = self._dirs()
        resid = d - D.T @ (D @ d)
        return bool(np.linalg.norm(resid) <= tol)

    def tangent_basis(self, man, x) -> np.ndarray:
        return self._dirs()


@dataclass(frozen=True)
class GreatSubsphere:
    """Intersection of the sphere with the orthocomplement of ambient normals."""

    normals: tuple  # rows: ambient normal vectors

    def _norms(self):
        N = np.atleast_2d(np.asarray(self.normals, dtype=float))
        Q, _ = np.linalg.qr(N.T)
        return Q.T

    def contains(self, man, x, tol=1e-8) -> bool:
        N = self._norms()
        return bool(np.linalg.norm(N @ np.asarray(x, dtype=float)) <= tol * man.radius)

    def tangent_basis(self, man, x) -> np.ndarray:
        # tangent to sphere and orthogonal to the normals
        x = np.asarray(x, dtype=float)
        N = self._norms()
        span = np.vstack([x / np.linalg.norm(x), N])
        basis = []
        m = man.ambient_dim
        for k in range(m):
            e = np.zeros(m)
            e[k] = 1.0
            for b in list(span) + basis:
                e = e - (b @ e) * b
            ne = np.linalg.norm(e)
            if ne > 1e-10:
                basis.append(e / ne)
        return np.asarray(basis)


@dataclass(frozen=True)
class SubmanifoldPair:
    m0: object
    m1: object

    kind = "submanifold"


@dataclass(frozen=True)
class IsometryGraph:
    iso: Isometry

    kind = "isometry_graph"


@dataclass(frozen=True)
class Periodic:
    kind = "periodic"

    @property
    def iso(self) -> Isometry:
        return Identity()


def _bc_iso(bc) -> Optional[Isometry]:
    if isinstance(bc, Periodic):
        return Identity()
    if isinstance(bc, IsometryGraph):
        return bc.iso
    return None


# ---------------------------------------------------------------------------
# discrete paths
# ---------------------------------------------------------------------------


@dataclass
class DiscretePath:
    manifold: ManifoldModel
    nodes: np.ndarray  # (K+1, ambient)
    bc: object

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        if self.nodes.ndim != 2 or self.nodes.shape[0] < 3:
            raise ValueError("need at least 3 nodes")

    @property
    def K(self) -> int:
        return self.nodes.shape[0] - 1

    @property
    def h(self) -> float:
        return 1.0 / self.K

    def validate(self, tol: float = 1e-7):
        man = self.manifold
        for j in (0, self.K):
            man.check_point(self.nodes[j], tol=max(tol, 1e-7))
        iso = _bc_iso(self.bc)
        if iso is not None:
            img = iso.apply(self.nodes[0])
            if np.linalg.norm(man.log(img, man.unwrap(img, self.nodes[self.K]))
                              if isinstance(man, FlatTorus) else (self.nodes[self.K] - img)) > tol:
                raise ValueError("endpoints violate the isometry-graph boundary condition")
        elif isinstance(self.bc, SubmanifoldPair):
            if not self.bc.m0.contains(man, self.nodes[0], tol):
                raise ValueError("gamma(0) not on M0")
            if not self.bc.m1.contains(man, self.nodes[self.K], tol):
                raise ValueError("gamma(1) not on M1")

    def extended_node(self, i: int) -> np.ndarray:
        """Node of the invariant extension gamma*(t): index i may leave [0, K]."""
        iso = _bc_iso(self.bc)
        if iso is None:
            raise WrongBoundaryKind("extension requires a periodic or isometry-graph path")
        q, r = divmod(i, self.K)
        x = self.nodes[r]
        if q == 0:
            return x.copy()
        return iso.power(q).apply(x)

    def node_speeds(self, metric: FinslerMetric) -> np.ndarray:
        v = velocity_field(self)
        return np.array([metric.eval_F(x, vi) for x, vi in zip(self.nodes, v)])

    def copy_with(self, nodes) -> "DiscretePath":
        return DiscretePath(self.manifold, np.asarray(nodes, dtype=float), self.bc)


def torus_line(man: FlatTorus, winding, base=None, K: int = 128, bc=None) -> DiscretePath:
    """Straight closed curve with the given integer winding vector."""
    w = np.asarray(winding, dtype=float) * np.asarray(man.periods)
    base = np.zeros(len(man.periods)) if base is None else np.asarray(base, dtype=float)
    t = np.linspace(0.0, 1.0, K + 1)[:, None]
    nodes = man.wrap(base[None, :] + t * w[None, :])
    nodes[-1] = nodes[0] if bc is None or isinstance(bc, Periodic) else nodes[-1]
    return DiscretePath(man, nodes, bc or Periodic())


def great_circle_arc(man: Sphere, p, q, arc: float = 1.0, K: int = 128, bc=None,
                     phase: float = 0.0) -> DiscretePath:
    """gamma(t) = r (cos(Theta t + phase) p + sin(Theta t + phase) q) with
    Theta = 2 pi arc, for orthonormal ambient vectors p, q."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    th = 2.0 * np.pi * arc
    t = np.linspace(0.0, 1.0, K + 1) * th + phase
    nodes = man.radius * (np.cos(t)[:, None] * p[None, :] + np.sin(t)[:, None] * q[None, :])
    return DiscretePath(man, nodes, bc or Periodic())


def velocity_field(path: DiscretePath) -> np.ndarray:
    """Ambient node velocities: central differences (log-based), with the
    invariant extension across the seam for periodic/twisted paths and
    4th-order one-sided stencils at free ends."""
    man = path.manifold
    K, h = path.K, path.h
    out = np.zeros_like(path.nodes)
    iso = _bc_iso(path.bc)

    def node(i):
        if 0 <= i <= K:
            return path.nodes[i]
        return path.extended_node(i)

    for j in range(K + 1):
        if iso is not None or 2 <= j <= K - 2:
            if iso is not None:
                xm, xp = node(j - 1), node(j + 1)
            else:
                xm, xp = path.nodes[j - 1], path.nodes[j + 1]
            out[j] = (man.log(path.nodes[j], man.unwrap(path.nodes[j], xp))
                      - man.log(path.nodes[j], man.unwrap(path.nodes[j], xm))) / (2 * h)
        else:
            # one-sided 4th order at submanifold ends
            sgn = 1.0 if j <= 1 else -1.0
            idx = range(j, j + 5) if j <= 1 else range(j, j - 5, -1)
            coef = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
            acc = np.zeros(man.ambient_dim)
            for c, i in zip(coef, idx):
                acc += c * man.log(path.nodes[j], man.unwrap(path.nodes[j], path.nodes[i]))
            out[j] = sgn * acc / h
    return out


# ---------------------------------------------------------------------------
# parallel frames and the twist matrix
# ---------------------------------------------------------------------------


@dataclass
class TwistFrame:
    frames: np.ndarray          # (K+1, n, ambient), rows orthonormal tangent bases
    E: np.ndarray               # coefficient twist: xi(1) = E xi(0) <=> zeta(1) = I_* zeta(0)
    blocks: list                # normal-form blocks: ('rot', theta) | ('+1',) | ('-1',)
    p: int                      # number of 2x2 rotation blocks
    Xi: np.ndarray              # conjugation used to reach the normal form

    def block_matrix(self) -> np.ndarray:
        mats = []
        for b in self.blocks:
            if b[0] == "rot":
                c, s = np.cos(b[1]), np.sin(b[1])
                mats.append(np.array([[c, s], [-s, c]]))
            else:
                mats.append(np.array([[1.0 if b[0] == "+1" else -1.0]]))
        return sl.block_diag(*mats) if mats else np.zeros((0, 0))


def _transport_frame(man: ManifoldModel, x, y, F: np.ndarray) -> np.ndarray:
    out = np.array([man.transport(x, y, f) for f in F])
    # re-orthonormalize against drift; keep tangency on spheres
    if isinstance(man, Sphere):
        out = np.array([man.project_tangent(y, f) for f in out])
    q, r = np.linalg.qr(out.T)
    return (q * np.sign(np.diag(r))).T


def parallel_frame(path: DiscretePath, iso: Optional[Isometry] = None,
                   adapted_velocity: bool = False,
                   initial_frame: Optional[np.ndarray] = None,
                   normal_form: bool = True) -> TwistFrame:
    """g-orthonormal parallel frame along the path and its twist matrix.

    With ``adapted_velocity`` the first frame vector is the normalized initial
    velocity, so for geodesics the twist matrix splits into a trivial
    tangential block plus the normal-bundle twist.
    """
    man = path.manifold
    if iso is None:
        iso = _bc_iso(path.bc)
        if iso is None:
            raise WrongBoundaryKind("parallel_frame with a twist needs periodic/isometry bc")
    K = path.K
    n = man.intrinsic_dim
    if initial_frame is not None:
        F0 = np.asarray(initial_frame, dtype=float)
    elif adapted_velocity:
        v0 = velocity_field(path)[0]
        nv = np.linalg.norm(v0)
        if nv < 1e-12:
            raise DegenerateCurve("zero initial velocity")
        rows = [v0 / nv]
        for e in man.frame(path.nodes[0]):
            w = e.copy()
            for b in rows:
                w = w - (b @ w) * b
            if np.linalg.norm(w) > 1e-8:
                rows.append(w / np.linalg.norm(w))
            if len(rows) == n:
                break
        F0 = np.asarray(rows)
    else:
        F0 = man.frame(path.nodes[0])

    frames = np.zeros((K + 1, n, man.ambient_dim))
    frames[0] = F0
    for j in range(K):
        a = path.nodes[j]
        b = man.unwrap(a, path.nodes[j + 1]) if isinstance(man, FlatTorus) else path.nodes[j + 1]
        frames[j + 1] = _transport_frame(man, a, b, frames[j])

    # twist: coefficient-transfer matrix of I_* from frame(0) to frame(1)
    img = np.array([iso.differential(path.nodes[0], e) for e in frames[0]])  # rows I_* e_b(0)
    E = frames[K] @ img.T  # E[a, b] = <e_a(1), I_* e_b(0)>
    # orthogonality snap
    U, _, Vt = np.linalg.svd(E)
    E = U @ Vt

    if not normal_form:
        return TwistFrame(frames=frames, E=E, blocks=[], p=0, Xi=np.eye(n))
    blocks, p, Xi = _normal_form(E)
    frames = np.einsum("ab,kbm->kam", Xi.T, frames)
    E_nf = Xi.T @ E @ Xi
    return TwistFrame(frames=frames, E=E_nf, blocks=blocks, p=p, Xi=Xi)


def _normal_form(E: np.ndarray):
    """Order the real Schur form of an orthogonal matrix: 2x2 rotation blocks
    with angles in (0, pi) first, then +1 blocks, then -1 blocks."""
    Tq, Z = sl.schur(E, output="real")
    n = E.shape[0]
    items = []  # (sortkey, indices, block descriptor, column fix)
    i = 0
    while i < n:
        if i + 1 < n and abs(Tq[i + 1, i]) > 1e-10:
            B = Tq[i:i + 2, i:i + 2]
            cols = [i, i + 1]
            if B[0, 1] < 0:  # enforce sin(theta) > 0 by swapping basis vectors
                cols = [i + 1, i]
                B = B[::-1, ::-1]
            theta = float(np.arctan2(B[0, 1], B[0, 0]))
            items.append(((0, theta), cols, ("rot", theta)))
            i += 2
        else:
            val = 1.0 if Tq[i, i] > 0 else -1.0
            items.append(((1 if val > 0 else 2, 0.0), [i], ("+1",) if val > 0 else ("-1",)))
            i += 1
    items.sort(key=lambda it: it[0])
    order = [c for it in items for c in it[1]]
    Xi = Z[:, order]
    blocks = [it[2] for it in items]
    p = sum(1 for b in blocks if b[0] == "rot")
    return blocks, p, Xi


# ---------------------------------------------------------------------------
# the path chart: reduced coordinates, energy calculus
# ---------------------------------------------------------------------------


class PathChart:
    """Frame chart along a path with boundary conditions eliminated exactly."""

    def __init__(self, metric: FinslerMetric, path: DiscretePath,
                 adapted_velocity: bool = False, check_speed: bool = True):
        man = metric.manifold
        self.metric = metric
        self.path = path
        self.man = man
        K, n = path.K, man.intrinsic_dim
        self.K, self.n = K, n
        self.h = path.h
        self.kind, self.radius = kr.manifold_kind(man)
        self.ops = kr.segment_ops(metric, self.kind, self.radius)

        # unwrapped base representatives (freezes torus winding)
        bases = np.array(path.nodes, dtype=float)
        if isinstance(man, FlatTorus):
            for j in range(1, K + 1):
                bases[j] = man.unwrap(bases[j - 1], path.nodes[j])
            iso = _bc_iso(path.bc)
            if iso is not None:
                bases[K] = man.unwrap(bases[K - 1], iso.apply(path.nodes[0]))
        self.bases = bases

        if check_speed:
            sp_ = np.linalg.norm(np.diff(bases, axis=0) if self.kind == kr.KIND_FLAT
                                 else np.diff(path.nodes, axis=0), axis=1) / self.h
            mean_speed = float(np.mean(sp_))
            if mean_speed > 0 and np.min(sp_) < 1e-6 * mean_speed:
                raise DegenerateCurve("node speed below the regularity threshold")

        self.twist: Optional[TwistFrame] = None
        iso = _bc_iso(path.bc)
        if iso is not None:
            self.twist = parallel_frame(path, iso, adapted_velocity=adapted_velocity)
            self.frames = self.twist.frames
            self.T = kr.constraint_matrix(K, n, "twisted", E=self.twist.E)
        elif isinstance(path.bc, SubmanifoldPair):
            B0 = path.bc.m0.tangent_basis(man, path.nodes[0])
            tf = parallel_frame(path, Identity(), initial_frame=_complete_frame(man, path.nodes[0], B0))
            self.frames = tf.frames
            d0 = B0.shape[0]
            A0 = np.zeros((n, d0))
            A0[:d0, :d0] = np.eye(d0)
            B1 = path.bc.m1.tangent_basis(man, path.nodes[K])
            A1 = self.frames[K] @ B1.T if B1.shape[0] else np.zeros((n, 0))
            if A1.shape[1]:
                q, _ = np.linalg.qr(A1)
                A1 = q
            self.end_bases = (A0, A1)
            self.T = kr.constraint_matrix(K, n, "submanifold", A0=A0, A1=A1)
        else:
            raise WrongBoundaryKind(f"unsupported boundary condition {path.bc}")

        self.n_red = self.T.shape[1]
        self._gram = {}
        self._chol = None

    # -- basic algebra --------------------------------------------------------

    def gram(self, m_scale: float = 1.0) -> np.ndarray:
        key = float(m_scale)
        if key not in self._gram:
            M = kr.gram_matrix(self.K, self.n, self.h, m_scale)
            self._gram[key] = kr.reduce_form(self.T, M)
        return self._gram[key]

    def _gram_chol(self):
        if self._chol is None:
            self._chol = sl.cho_factor(self.gram(1.0))
        return self._chol

    def h1_inner(self, w1: np.ndarray, w2: np.ndarray, m_scale: float = 1.0) -> float:
        return float(w1 @ self.gram(m_scale) @ w2)

    def h1_norm(self, w: np.ndarray, m_scale: float = 1.0) -> float:
        return float(np.sqrt(max(0.0, self.h1_inner(w, w, m_scale))))

    def zero(self) -> np.ndarray:
        return np.zeros(self.n_red)

    def coefficients(self, w: np.ndarray) -> np.ndarray:
        return kr.expand_vector(self.T, w, self.K, self.n)

    def from_coefficients(self, xi_full: np.ndarray) -> np.ndarray:
        """M-orthogonal projection of a full coefficient field into the
        constrained space (least squares in the H^1 metric)."""
        M = kr.gram_matrix(self.K, self.n, self.h, 1.0)
        rhs = np.asarray(self.T.T @ (M @ xi_full.reshape(-1)))
        return sl.cho_solve(self._gram_chol(), rhs)

    # -- energy calculus ------------------------------------------------------

    def energy(self, w: Optional[np.ndarray] = None) -> float:
        xi = self.coefficients(w) if w is not None else np.zeros((self.K + 1, self.n))
        return kr.energy_value(self.ops, self.h, self.bases, self.frames, xi)

    def differential(self, w: Optional[np.ndarray] = None) -> np.ndarray:
        xi = self.coefficients(w) if w is not None else np.zeros((self.K + 1, self.n))
        r = kr.energy_differential(self.ops, self.h, self.bases, self.frames, xi)
        return kr.reduce_vector(self.T, r)

    def differential_full(self, w: Optional[np.ndarray] = None) -> np.ndarray:
        xi = self.coefficients(w) if w is not None else np.zeros((self.K + 1, self.n))
        return kr.energy_differential(self.ops, self.h, self.bases, self.frames, xi)

    def hessian(self, w: Optional[np.ndarray] = None) -> np.ndarray:
        xi = self.coefficients(w) if w is not None else np.zeros((self.K + 1, self.n))
        Hs = kr.segment_hessians(self.ops, self.h, self.bases, self.frames, xi)
        B = kr.assemble_hessian(Hs, self.K, self.n)
        return kr.reduce_form(self.T, B)

    def hessian_and_pform(self, w: Optional[np.ndarray] = None):
        xi = self.coefficients(w) if w is not None else np.zeros((self.K + 1, self.n))
        Hs = kr.segment_hessians(self.ops, self.h, self.bases, self.frames, xi)
        B = kr.reduce_form(self.T, kr.assemble_hessian(Hs, self.K, self.n))
        P = kr.reduce_form(self.T, kr.assemble_pform(Hs, self.K, self.n, self.h))
        return B, P

    def gradient(self, w: Optional[np.ndarray] = None, mode: str = "direct") -> np.ndarray:
        """H^1 Riesz representative of the discrete differential."""
        if mode == "direct":
            r = self.differential(w)
            return sl.cho_solve(self._gram_chol(), r)
        if mode == "paper":
            from ._papergrad import paper_gradient

            return paper_gradient(self, w)
        raise ValueError(mode)

    def gradient_norm(self, w: Optional[np.ndarray] = None) -> float:
        g = self.gradient(w)
        return self.h1_norm(g)

    # -- geometry -------------------------------------------------------------

    def nodes_from(self, w: np.ndarray) -> np.ndarray:
        xi = self.coefficients(w)
        vecs = np.einsum("ja,jam->jm", xi, self.frames)
        out = np.zeros_like(self.path.nodes)
        for j in range(self.K + 1):
            out[j] = self.man.retract(self.path.nodes[j], self.man.project_tangent(self.path.nodes[j], vecs[j])
                                      if isinstance(self.man, Sphere) else vecs[j])
        iso = _bc_iso(self.path.bc)
        if iso is not None:
            out[self.K] = iso.apply(out[0])  # exact closure (holds analytically; enforce roundoff)
        return out

    def path_from(self, w: np.ndarray) -> DiscretePath:
        return self.path.copy_with(self.nodes_from(w))

    def ambient_field(self, w: np.ndarray) -> np.ndarray:
        xi = self.coefficients(w)
        return np.einsum("ja,jam->jm", xi, self.frames)

    def tangent_direction(self) -> np.ndarray:
        """Reduced coefficients of the velocity field (the orbit direction)."""
        v = velocity_field(self.path)
        xi = np.einsum("jam,jm->ja", self.frames, v)
        return self.from_coefficients(xi)


def _complete_frame(man: ManifoldModel, x, rows: np.ndarray) -> np.ndarray:
    n = man.intrinsic_dim
    out = [r / np.linalg.norm(r) for r in rows]
    for e in man.frame(x):
        w = e.copy()
        for b in out:
            w = w - (b @ w) * b
        if np.linalg.norm(w) > 1e-8:
            out.append(w / np.linalg.norm(w))
        if len(out) == n:
            break
    return np.asarray(out)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def energy(metric: FinslerMetric, path: DiscretePath) -> float:
    """Midpoint-rule discrete energy of F^2 (zero iff constant path)."""
    man = metric.manifold
    bases = np.array(path.nodes, dtype=float)
    if isinstance(man, FlatTorus):
        for j in range(1, path.K + 1):
            bases[j] = man.unwrap(bases[j - 1], path.nodes[j])
        iso = _bc_iso(path.bc)
        if iso is not None:
            bases[path.K] = man.unwrap(bases[path.K - 1], iso.apply(path.nodes[0]))
    ops = kr.segment_ops(metric, *kr.manifold_kind(man))
    n = man.intrinsic_dim
    frames = np.zeros((path.K + 1, n, man.ambient_dim))
    xi = np.zeros((path.K + 1, n))
    return kr.energy_value(ops, path.h, bases, frames, xi)


def h1_inner(chart: PathChart, w1, w2, m_scale: float = 1.0) -> float:
    return chart.h1_inner(np.asarray(w1), np.asarray(w2), m_scale)


def energy_gradient(metric: FinslerMetric, path: DiscretePath, mode: str = "direct"):
    chart = PathChart(metric, path)
    return chart, chart.gradient(mode=mode)


def r_action(path: DiscretePath, s: float) -> DiscretePath:
    """Shift action mu(gamma, s)(t) = gamma(t+s) with the isometry wrap."""
    iso = _bc_iso(path.bc)
    if iso is None:
        raise WrongBoundaryKind("r_action needs a periodic or isometry-graph path")
    man = path.manifold
    K = path.K
    sigma = s * K
    m = int(np.floor(sigma + 1e-12))
    f = sigma - m
    if abs(f) < 1e-12:
        nodes = np.array([path.extended_node(j + m) for j in range(K + 1)])
        return path.copy_with(nodes)
    nodes = np.zeros_like(path.nodes)
    for j in range(K + 1):
        a = path.extended_node(j + m)
        b = path.extended_node(j + m + 1)
        if isinstance(man, FlatTorus):
            b = man.unwrap(a, b)
        nodes[j] = man.geodesic_interp(a, b, f)
    return path.copy_with(nodes)


def field_action(path: DiscretePath, vectors: np.ndarray, s: float) -> np.ndarray:
    """Shift action on an ambient node-vector field along the path."""
    iso = _bc_iso(path.bc)
    if iso is None:
        raise WrongBoundaryKind("field_action needs a periodic or isometry-graph path")
    man = path.manifold
    K = path.K
    sigma = s * K
    m = int(np.floor(sigma + 1e-12))
    f = sigma - m

    def ext_vec(i):
        q, r = divmod(i, K)
        v = vectors[r]
        x = path.nodes[r]
        if q != 0:
            v = iso.power(q).differential(x, v)
        return v

    if abs(f) < 1e-12:
        return np.array([ext_vec(j + m) for j in range(K + 1)])
    out = np.zeros_like(vectors)
    newp = r_action(path, s)
    for j in range(K + 1):
        va, vb = ext_vec(j + m), ext_vec(j + m + 1)
        w = (1.0 - f) * va + f * vb
        out[j] = man.project_tangent(newp.nodes[j], w) if isinstance(man, Sphere) else w
    return out


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def path_to_dict(path: DiscretePath) -> dict:
    from .descriptors import bc_to_dict, manifold_to_dict

    return {
        "manifold": manifold_to_dict(path.manifold),
        "bc": bc_to_dict(path.bc),
        "nodes": [[float(v) for v in row] for row in path.nodes],
    }


def path_from_dict(d: dict) -> DiscretePath:
    from .descriptors import bc_from_dict, manifold_from_dict

    man = manifold_from_dict(d["manifold"])
    bc = bc_from_dict(d["bc"], man)
    return DiscretePath(man, np.asarray(d["nodes"], dtype=float), bc)


def field_to_csv(path: DiscretePath, vectors: np.ndarray, fname: str):
    import csv

    with open(fname, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t"] + [f"x{i}" for i in range(path.nodes.shape[1])]
                    + [f"v{i}" for i in range(vectors.shape[1])])
        for j in range(path.K + 1):
            wr.writerow([j * path.h] + list(map(float, path.nodes[j])) + list(map(float, vectors[j])))
