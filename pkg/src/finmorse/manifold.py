"""Embedded model manifolds with closed-form exponential maps, and their isometries.

Three builtin models: flat tori (global chart, mod-lattice), round spheres
embedded in R^{n+1}, and Euclidean space.  Every operation is a closed form,
so the chart machinery downstream carries no discretization error of its own.
Points and tangent vectors are plain numpy arrays in ambient coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import PointOffManifold, StepTooLarge

ON_MANIFOLD_TOL = 1e-9


def _unit(v):
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("zero vector has no direction")
    return v / n


@dataclass(frozen=True)
class ManifoldModel:
    """Base class; subclasses fix the embedding and its geodesic toolkit."""

    @property
    def ambient_dim(self) -> int:
        raise NotImplementedError

    @property
    def intrinsic_dim(self) -> int:
        raise NotImplementedError

    # -- point/tangent basics -------------------------------------------------

    def contains(self, x, tol: float = ON_MANIFOLD_TOL) -> bool:
        raise NotImplementedError

    def check_point(self, x, tol: float = ON_MANIFOLD_TOL):
        if not self.contains(x, tol):
            raise PointOffManifold(f"point {x} off manifold beyond tol={tol}")

    def project_tangent(self, x, w):
        """Orthogonal projection of an ambient vector onto T_x M."""
        raise NotImplementedError

    def retract(self, x, v):
        """Geodesic exponential exp_x(v) of the background metric."""
        raise NotImplementedError

    def log(self, x, y):
        """Inverse of retract: the tangent vector at x reaching y."""
        raise NotImplementedError

    def midpoint(self, x, y):
        """Geodesic midpoint of two nearby points."""
        raise NotImplementedError

    def transport(self, x, y, w):
        """Parallel transport of tangent w along the geodesic from x to y."""
        raise NotImplementedError

    def geodesic_interp(self, x, y, s: float):
        """Point at fraction s of the geodesic from x to y."""
        raise NotImplementedError

    def unwrap(self, base, y):
        """Representative of y in the chart sheet closest to base (tori only)."""
        return np.asarray(y, dtype=float)

    def wrap(self, x):
        """Canonical representative of x (tori only)."""
        return np.asarray(x, dtype=float)

    def frame(self, x) -> np.ndarray:
        """A deterministic orthonormal basis of T_x M, shape (n, ambient_dim)."""
        raise NotImplementedError

    def random_point(self, rng: np.random.Generator):
        raise NotImplementedError

    def random_tangent(self, rng: np.random.Generator, x):
        w = rng.standard_normal(self.ambient_dim)
        return self.project_tangent(x, w)


@dataclass(frozen=True)
class EuclideanSpace(ManifoldModel):
    dim: int

    @property
    def ambient_dim(self) -> int:
        return self.dim

    @property
    def intrinsic_dim(self) -> int:
        return self.dim

    def contains(self, x, tol: float = ON_MANIFOLD_TOL) -> bool:
        return np.shape(x) == (self.dim,)

    def project_tangent(self, x, w):
        return np.asarray(w, dtype=float)

    def retract(self, x, v):
        return np.asarray(x, dtype=float) + np.asarray(v, dtype=float)

    def log(self, x, y):
        return np.asarray(y, dtype=float) - np.asarray(x, dtype=float)

    def midpoint(self, x, y):
        return 0.5 * (np.asarray(x, dtype=float) + np.asarray(y, dtype=float))

    def transport(self, x, y, w):
        return np.asarray(w, dtype=float)

    def geodesic_interp(self, x, y, s: float):
        return (1.0 - s) * np.asarray(x, dtype=float) + s * np.asarray(y, dtype=float)

    def frame(self, x) -> np.ndarray:
        return np.eye(self.dim)

    def random_point(self, rng):
        return rng.standard_normal(self.dim)


@dataclass(frozen=True)
class FlatTorus(ManifoldModel):
    """R^n modulo the rectangular lattice diag(periods)."""

    periods: tuple

    def __post_init__(self):
        object.__setattr__(self, "periods", tuple(float(p) for p in self.periods))
        if any(p <= 0 for p in self.periods):
            raise ValueError("torus periods must be positive")

    @property
    def ambient_dim(self) -> int:
        return len(self.periods)

    @property
    def intrinsic_dim(self) -> int:
        return len(self.periods)

    def _p(self):
        return np.asarray(self.periods)

    def contains(self, x, tol: float = ON_MANIFOLD_TOL) -> bool:
        return np.shape(x) == (len(self.periods),)

    def project_tangent(self, x, w):
        return np.asarray(w, dtype=float)

    def retract(self, x, v):
        return self.wrap(np.asarray(x, dtype=float) + np.asarray(v, dtype=float))

    def wrap(self, x):
        p = self._p()
        return np.mod(np.asarray(x, dtype=float), p)

    def unwrap(self, base, y):
        # representative of y within half a period of base, component-wise
        p = self._p()
        d = np.asarray(y, dtype=float) - np.asarray(base, dtype=float)
        d -= p * np.round(d / p)
        return np.asarray(base, dtype=float) + d

    def log(self, x, y):
        return self.unwrap(x, y) - np.asarray(x, dtype=float)

    def midpoint(self, x, y):
        return self.wrap(np.asarray(x, dtype=float) + 0.5 * self.log(x, y))

    def transport(self, x, y, w):
        return np.asarray(w, dtype=float)

    def geodesic_interp(self, x, y, s: float):
        return self.wrap(np.asarray(x, dtype=float) + s * self.log(x, y))

    def frame(self, x) -> np.ndarray:
        return np.eye(len(self.periods))

    def random_point(self, rng):
        return rng.uniform(0.0, 1.0, len(self.periods)) * self._p()


@dataclass(frozen=True)
class Sphere(ManifoldModel):
    """Round sphere of given intrinsic dimension and radius in R^{dim+1}."""

    dim: int
    radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "radius", float(self.radius))
        if self.radius <= 0:
            raise ValueError("sphere radius must be positive")

    @property
    def ambient_dim(self) -> int:
        return self.dim + 1

    @property
    def intrinsic_dim(self) -> int:
        return self.dim

    def contains(self, x, tol: float = ON_MANIFOLD_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return x.shape == (self.dim + 1,) and abs(np.linalg.norm(x) - self.radius) <= tol * max(1.0, self.radius)

    def project_tangent(self, x, w):
        x = np.asarray(x, dtype=float)
        w = np.asarray(w, dtype=float)
        self.check_point(x)
        return w - (x @ w) / self.radius**2 * x

    def retract(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        self.check_point(x)
        r = self.radius
        nv = np.linalg.norm(v)
        if nv >= np.pi * r:
            raise StepTooLarge(f"|v|={nv:.6g} reaches the cut locus (pi*r={np.pi*r:.6g})")
        if nv == 0.0:
            return x.copy()
        th = nv / r
        return np.cos(th) * x + np.sin(th) * (r / nv) * v

    def log(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r = self.radius
        c = np.clip((x @ y) / r**2, -1.0, 1.0)
        th = np.arccos(c)
        if th == 0.0:
            return np.zeros_like(x)
        d = y - c * x
        nd = np.linalg.norm(d)
        if nd == 0.0:
            raise StepTooLarge("log of an antipodal point is undefined")
        return (r * th / nd) * d

    def midpoint(self, x, y):
        m = np.asarray(x, dtype=float) + np.asarray(y, dtype=float)
        nm = np.linalg.norm(m)
        if nm == 0.0:
            raise StepTooLarge("midpoint of antipodal points is undefined")
        return self.radius * m / nm

    def transport(self, x, y, w):
        x = np.asarray(x, dtype=float)
        w = np.asarray(w, dtype=float)
        u = self.log(x, y)
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return w.copy()
        uh = u / nu
        th = nu / self.radius
        a = w @ uh
        return (w - a * uh) + a * (np.cos(th) * uh - np.sin(th) * x / self.radius)

    def geodesic_interp(self, x, y, s: float):
        return self.retract(x, s * self.log(x, y))

    def frame(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        self.check_point(x)
        # complete x/|x| to an orthonormal ambient basis, deterministically
        m = self.ambient_dim
        basis = [x / np.linalg.norm(x)]
        for k in np.argsort(np.abs(x)):  # start from axes most transverse to x
            e = np.zeros(m)
            e[k] = 1.0
            for b in basis:
                e = e - (b @ e) * b
            ne = np.linalg.norm(e)
            if ne > 1e-8:
                basis.append(e / ne)
            if len(basis) == m:
                break
        return np.asarray(basis[1:])

    def random_point(self, rng):
        x = rng.standard_normal(self.dim + 1)
        return self.radius * x / np.linalg.norm(x)


# ---------------------------------------------------------------------------
# isometries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Isometry:
    """Base class for isometries of the background metric."""

    def apply(self, x):
        raise NotImplementedError

    def differential(self, x, u):
        raise NotImplementedError

    def inverse(self) -> "Isometry":
        raise NotImplementedError

    @property
    def order(self) -> Optional[int]:
        """Smallest p >= 1 with iso^p = id, or None when infinite."""
        raise NotImplementedError

    def power(self, m: int) -> "Isometry":
        if m == 0:
            return Identity()
        base = self if m > 0 else self.inverse()
        out: Isometry = base
        for _ in range(abs(m) - 1):
            out = Composition((out, base)).simplified()
        return out


@dataclass(frozen=True)
class Identity(Isometry):
    def apply(self, x):
        return np.asarray(x, dtype=float)

    def differential(self, x, u):
        return np.asarray(u, dtype=float)

    def inverse(self):
        return Identity()

    @property
    def order(self):
        return 1


@dataclass(frozen=True)
class TorusTranslation(Isometry):
    manifold: FlatTorus
    offset: tuple

    def __post_init__(self):
        object.__setattr__(self, "offset", tuple(float(a) for a in self.offset))

    def apply(self, x):
        return self.manifold.wrap(np.asarray(x, dtype=float) + np.asarray(self.offset))

    def differential(self, x, u):
        return np.asarray(u, dtype=float)

    def inverse(self):
        return TorusTranslation(self.manifold, tuple(-a for a in self.offset))

    @property
    def order(self):
        # finite iff every offset component is a rational fraction of its period
        p = np.asarray(self.manifold.periods)
        a = np.mod(np.asarray(self.offset), p)
        if np.allclose(a, 0.0, atol=1e-12):
            return 1
        for k in range(1, 1001):
            if np.allclose(np.mod(k * a + 0.5 * p, p) - 0.5 * p, 0.0, atol=1e-9):
                return k
        return None


@dataclass(frozen=True)
class TorusLatticeAutomorphism(Isometry):
    """x -> A x mod lattice, with A an integer matrix preserving the lattice.

    Only orthogonal A are isometries of the flat metric; validate() checks that.
    """

    manifold: FlatTorus
    matrix: tuple

    def __post_init__(self):
        A = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", tuple(tuple(float(v) for v in row) for row in A))

    def _A(self):
        return np.asarray(self.matrix)

    def apply(self, x):
        return self.manifold.wrap(self._A() @ np.asarray(x, dtype=float))

    def differential(self, x, u):
        return self._A() @ np.asarray(u, dtype=float)

    def inverse(self):
        return TorusLatticeAutomorphism(self.manifold, tuple(map(tuple, np.linalg.inv(self._A()))))

    @property
    def order(self):
        A = self._A()
        M = np.eye(A.shape[0])
        for k in range(1, 1001):
            M = A @ M
            if np.allclose(M, np.eye(A.shape[0]), atol=1e-9):
                return k
        return None


@dataclass(frozen=True)
class SphereRotation(Isometry):
    manifold: Sphere
    matrix: tuple

    def __post_init__(self):
        Q = np.asarray(self.matrix, dtype=float)
        if not np.allclose(Q @ Q.T, np.eye(Q.shape[0]), atol=1e-10):
            raise ValueError("sphere rotation matrix must be orthogonal")
        object.__setattr__(self, "matrix", tuple(tuple(float(v) for v in row) for row in Q))

    @classmethod
    def about_z(cls, manifold: Sphere, angle: float) -> "SphereRotation":
        """Rotation fixing the last ambient axis (for S^2 in R^3: the polar axis)."""
        m = manifold.ambient_dim
        Q = np.eye(m)
        c, s = np.cos(angle), np.sin(angle)
        Q[0, 0], Q[0, 1], Q[1, 0], Q[1, 1] = c, -s, s, c
        return cls(manifold, tuple(map(tuple, Q)))

    def _Q(self):
        return np.asarray(self.matrix)

    def apply(self, x):
        return self._Q() @ np.asarray(x, dtype=float)

    def differential(self, x, u):
        return self._Q() @ np.asarray(u, dtype=float)

    def inverse(self):
        return SphereRotation(self.manifold, tuple(map(tuple, self._Q().T)))

    @property
    def order(self):
        Q = self._Q()
        M = np.eye(Q.shape[0])
        for k in range(1, 10001):
            M = Q @ M
            if np.allclose(M, np.eye(Q.shape[0]), atol=1e-9):
                return k
        return None


@dataclass(frozen=True)
class Composition(Isometry):
    parts: tuple  # applied right-to-left, like function composition

    def simplified(self) -> Isometry:
        flat = []
        for p in self.parts:
            if isinstance(p, Composition):
                flat.extend(p.parts)
            elif not isinstance(p, Identity):
                flat.append(p)
        if not flat:
            return Identity()
        if len(flat) == 1:
            return flat[0]
        if all(isinstance(p, TorusTranslation) for p in flat):
            total = np.sum([np.asarray(p.offset) for p in flat], axis=0)
            return TorusTranslation(flat[0].manifold, tuple(total))
        if all(isinstance(p, SphereRotation) for p in flat):
            Q = np.eye(np.asarray(flat[0].matrix).shape[0])
            for p in flat:
                Q = np.asarray(p.matrix) @ Q
            return SphereRotation(flat[0].manifold, tuple(map(tuple, Q)))
        return Composition(tuple(flat))

    def apply(self, x):
        y = np.asarray(x, dtype=float)
        for p in reversed(self.parts):
            y = p.apply(y)
        return y

    def differential(self, x, u):
        y = np.asarray(x, dtype=float)
        w = np.asarray(u, dtype=float)
        for p in reversed(self.parts):
            w = p.differential(y, w)
            y = p.apply(y)
        return w

    def inverse(self):
        return Composition(tuple(p.inverse() for p in self.parts[::-1]))

    @property
    def order(self):
        s = self.simplified()
        if isinstance(s, Composition):
            return None
        return s.order


def isometry_apply(iso: Isometry, x):
    return iso.apply(x)


def isometry_differential(iso: Isometry, x, u):
    return iso.differential(x, u)


def validate_isometry(man: ManifoldModel, iso: Isometry, rng=None, samples: int = 8, tol: float = 1e-9) -> dict:
    """Check metric preservation |dI(x)[u]| = |u| and, for finite order p,
    that the p-fold composition is the identity on sampled points."""
    rng = rng or np.random.default_rng(0)
    worst_metric = 0.0
    for _ in range(samples):
        x = man.random_point(rng)
        u = man.random_tangent(rng, x)
        y = iso.apply(x)
        v = iso.differential(x, u)
        man.check_point(y, tol=1e-7)
        worst_metric = max(worst_metric, abs(np.linalg.norm(v) - np.linalg.norm(u)))
    result = {"metric_residual": worst_metric, "ok": worst_metric <= tol}
    p = iso.order
    if p is not None:
        worst_id = 0.0
        for _ in range(samples):
            x = man.random_point(rng)
            y = x
            for _ in range(p):
                y = iso.apply(y)
            d = np.linalg.norm(man.log(x, man.unwrap(x, y)) if isinstance(man, FlatTorus) else (y - x))
            worst_id = max(worst_id, d)
        result["order"] = p
        result["identity_residual"] = worst_id
        result["ok"] = result["ok"] and worst_id <= max(tol, 1e-8)
    return result
