"""Finsler metrics on the model manifolds and their fiber calculus.

Three builtin families:

* ``RiemannianSquareRoot`` -- F = sqrt(g(v,v)) for the background metric g,
* ``Randers`` -- F = sqrt(g(v,v)) + beta(v) with a constant one-form beta
  (flat models only),
* ``PerturbedRiemannian`` -- F^2 = g(v,v) + eps * q(x,v)^2 / g(v,v) with a
  fixed fiber-quadratic q; reversible, neither Riemannian nor Randers.

Fiber derivatives (fundamental tensor, Cartan tensor) come either from exact
differentiation of the closed-form expressions (via jax) or from high-order
central finite differences, selectable per metric.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import jax
import jax.numpy as jnp
import numpy as np

from .errors import DegenerateFiberVector, StrongConvexityViolated
from .manifold import EuclideanSpace, FlatTorus, ManifoldModel, Sphere

jax.config.update("jax_enable_x64", True)

# below this fraction of the reference scale a fiber vector counts as degenerate
DEGENERATE_FIBER_FRACTION = 1e-6

_FD2_STEP = 1e-4  # relative step, second fiber derivatives
_FD3_STEP = 3e-3  # relative step, third fiber derivatives (roundoff balance)


@dataclass(frozen=True)
class FinslerMetric:
    """Base class.  Subclasses implement ``f2`` as a jax-traceable function of
    ambient coordinates (x, v)."""

    manifold: ManifoldModel = field(default=None)
    derivative_mode: str = "closed-form"

    def f2(self, x, v):
        raise NotImplementedError

    # -- scalar evaluation ----------------------------------------------------

    def eval_F(self, x, v) -> float:
        v = np.asarray(v, dtype=float)
        if np.linalg.norm(v) == 0.0:
            return 0.0
        return float(np.sqrt(max(0.0, float(self.f2(jnp.asarray(x), jnp.asarray(v))))))

    def eval_L(self, x, v) -> float:
        return self.eval_F(x, v) ** 2

    def check_fiber(self, x, y, scale: float = 1.0):
        ny = float(np.linalg.norm(np.asarray(y, dtype=float)))
        if ny < DEGENERATE_FIBER_FRACTION * max(scale, 1e-300):
            raise DegenerateFiberVector(f"|y|={ny:.3e} below threshold for scale {scale:.3e}")

    @property
    def is_riemannian(self) -> bool:
        return False

    @property
    def reversible(self) -> bool:
        return False


@dataclass(frozen=True)
class RiemannianSquareRoot(FinslerMetric):
    def f2(self, x, v):
        return jnp.dot(v, v)

    @property
    def is_riemannian(self):
        return True

    @property
    def reversible(self):
        return True


@dataclass(frozen=True)
class Randers(FinslerMetric):
    """F = |v| + <beta, v> with constant beta, on flat models."""

    beta: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        if self.manifold is not None and isinstance(self.manifold, Sphere):
            raise ValueError("constant-beta Randers metrics are supported on flat models only")

    @property
    def admissible(self) -> bool:
        return float(np.linalg.norm(self.beta)) < 1.0

    def f2(self, x, v):
        b = jnp.asarray(self.beta)
        s = jnp.dot(v, v)
        safe = s > 1e-300
        root = jnp.sqrt(jnp.where(safe, s, 1.0))
        F = jnp.where(safe, root, 0.0) + jnp.dot(b, v)
        return F * F

    def fundamental_closed_form(self, x, y) -> np.ndarray:
        """Explicit Randers fundamental tensor at (x, y) for flat g."""
        y = np.asarray(y, dtype=float)
        b = np.asarray(self.beta)
        a = np.linalg.norm(y)
        if a == 0.0:
            raise DegenerateFiberVector("fundamental tensor undefined at v=0")
        n = len(y)
        I = np.eye(n)
        bv = b @ y
        g = I + np.outer(b, b) + (bv / a) * (I - np.outer(y, y) / a**2)
        g += (np.outer(y, b) + np.outer(b, y)) / a
        return g


@dataclass(frozen=True)
class PerturbedRiemannian(FinslerMetric):
    """F^2 = g(v,v) + eps * q(x,v)^2 / g(v,v),  q(x,v) = cos(2 pi x_1/p_1) v_0^2.

    The x-dependence sits in the second coordinate only, so translations along
    the first coordinate remain exact isometries while translations in the
    second are broken; the fiber dependence is quartic, hence the metric is
    reversible and genuinely non-Randers.
    """

    epsilon: float = 0.05

    def __post_init__(self):
        if self.manifold is not None and isinstance(self.manifold, Sphere):
            raise ValueError("the builtin perturbed metric lives on flat models")

    def _period(self) -> float:
        if isinstance(self.manifold, FlatTorus):
            return self.manifold.periods[1]
        return 1.0

    def q(self, x, v):
        return jnp.cos(2.0 * jnp.pi * x[1] / self._period()) * v[0] ** 2

    def f2(self, x, v):
        s = jnp.dot(v, v)
        qq = self.q(x, v) ** 2
        safe = s > 1e-300
        return s + self.epsilon * jnp.where(safe, qq / jnp.where(safe, s, 1.0), 0.0)

    @property
    def reversible(self):
        return True


# ---------------------------------------------------------------------------
# fiber derivatives
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FundamentalTensorValue:
    x: np.ndarray
    y: np.ndarray
    g: np.ndarray          # (n, n) in the orthonormal frame
    frame: np.ndarray      # (n, ambient)

    def apply(self, u, v) -> float:
        """g_F(y)[u, v] for ambient tangent vectors u, v."""
        uc = self.frame @ np.asarray(u, dtype=float)
        vc = self.frame @ np.asarray(v, dtype=float)
        return float(uc @ self.g @ vc)


@dataclass(frozen=True)
class CartanTensorValue:
    x: np.ndarray
    y: np.ndarray
    C: np.ndarray          # (n, n, n), totally symmetric
    frame: np.ndarray


def _frame_for(metric: FinslerMetric, x) -> np.ndarray:
    return metric.manifold.frame(x)


def _f2_in_frame(metric, x, frame):
    xj = jnp.asarray(x)
    Ej = jnp.asarray(frame)

    def f(w):
        return metric.f2(xj, w @ Ej)

    return f


def _fd_directional(f, w0, dirs, order: int, step: float):
    """Iterated 4th-order central first differences along the rows of dirs."""
    if order == 0:
        return f(w0)
    d = dirs[0]
    c = np.array([1.0, -8.0, 8.0, -1.0]) / (12.0 * step)
    offs = [-2.0, -1.0, 1.0, 2.0]
    val = 0.0
    for ci, oi in zip(c, offs):
        val = val + ci * _fd_directional(f, w0 + oi * step * d, dirs[1:], order - 1, step)
    return val


def fundamental_tensor(metric: FinslerMetric, x, y, scale: float = 1.0) -> FundamentalTensorValue:
    """Fiber Hessian of F^2/2 at (x, y), in the orthonormal frame at x."""
    metric.check_fiber(x, y, scale)
    E = _frame_for(metric, x)
    yc = E @ np.asarray(y, dtype=float)
    if metric.derivative_mode == "fd":
        f = _f2_in_frame(metric, x, E)
        h = _FD2_STEP * np.linalg.norm(yc)
        n = len(yc)
        g = np.empty((n, n))
        for a in range(n):
            for b in range(a, n):
                dirs = [np.eye(n)[a], np.eye(n)[b]]
                g[a, b] = g[b, a] = 0.5 * float(_fd_directional(lambda w: float(f(jnp.asarray(w))), yc, dirs, 2, h))
    else:
        from . import _kernels as kr

        ops = kr.chart_ops(metric, *kr.manifold_kind(metric.manifold))
        g = np.asarray(ops.gab(jnp.asarray(np.asarray(x, dtype=float)), jnp.asarray(E),
                               jnp.zeros(len(yc)), jnp.asarray(yc)))
        g = 0.5 * (g + g.T)
    return FundamentalTensorValue(np.asarray(x, dtype=float), np.asarray(y, dtype=float), g, E)


def cartan_tensor(metric: FinslerMetric, x, y, scale: float = 1.0) -> CartanTensorValue:
    """Third fiber derivative of F^2/4 at (x, y), in the orthonormal frame."""
    metric.check_fiber(x, y, scale)
    E = _frame_for(metric, x)
    yc = E @ np.asarray(y, dtype=float)
    n = len(yc)
    if metric.derivative_mode == "fd":
        f = _f2_in_frame(metric, x, E)
        h = _FD3_STEP * np.linalg.norm(yc)
        C = np.empty((n, n, n))
        I = np.eye(n)
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    C[a, b, c] = 0.25 * float(
                        _fd_directional(lambda w: float(f(jnp.asarray(w))), yc, [I[a], I[b], I[c]], 3, h)
                    )
    else:
        from . import _kernels as kr

        ops = kr.chart_ops(metric, *kr.manifold_kind(metric.manifold))
        C = np.asarray(ops.cartan(jnp.asarray(np.asarray(x, dtype=float)), jnp.asarray(E),
                                  jnp.zeros(n), jnp.asarray(yc)))
    # symmetrize over all slots to clean roundoff
    C = (C + C.transpose(0, 2, 1) + C.transpose(1, 0, 2) + C.transpose(1, 2, 0)
         + C.transpose(2, 0, 1) + C.transpose(2, 1, 0)) / 6.0
    return CartanTensorValue(np.asarray(x, dtype=float), np.asarray(y, dtype=float), C, E)


def check_invariance(metric: FinslerMetric, iso, rng=None, samples: int = 20) -> float:
    """Max |F(I x, I_* v) - F(x, v)| over random samples."""
    rng = rng or np.random.default_rng(0)
    man = metric.manifold
    worst = 0.0
    for _ in range(samples):
        x = man.random_point(rng)
        v = man.random_tangent(rng, x)
        worst = max(worst, abs(metric.eval_F(iso.apply(x), iso.differential(x, v)) - metric.eval_F(x, v)))
    return worst


# ---------------------------------------------------------------------------
# (L1)/(L2) constants
# ---------------------------------------------------------------------------


def check_conditions(metric: FinslerMetric, x_samples=None, y_samples=None,
                     rng=None, n_x: int = 8, fiber_grid: int = 32) -> dict:
    """Estimate the strong-convexity constant C1 = min eig of the fiber Hessian
    of F^2 and the smallest C2 bounding the chart second derivatives
    (|d2_xx| <= C2 (1+|v|^2), |d2_xv| <= C2 (1+|v|), |d2_vv| <= C2), over a
    sample grid of base points and fibers.  Raises StrongConvexityViolated
    when C1 <= 0."""
    from . import _kernels as kr

    man = metric.manifold
    rng = rng or np.random.default_rng(0)
    if x_samples is None:
        x_samples = [man.random_point(rng) for _ in range(n_x)]
    ops = kr.chart_ops(metric, *kr.manifold_kind(man))
    n = man.intrinsic_dim
    radii = (0.5, 1.0, 2.0)

    c1 = np.inf
    c2 = 0.0
    count = 0
    for x in x_samples:
        E = man.frame(x)
        if y_samples is not None:
            fibers = [E @ np.asarray(yv, dtype=float) for yv in y_samples]
        elif n == 2:
            angles = np.linspace(0.0, 2.0 * np.pi, fiber_grid, endpoint=False)
            fibers = [r * np.array([np.cos(a), np.sin(a)]) for r in radii for a in angles]
        else:
            fibers = [rng.choice(radii) * (w := rng.standard_normal(n)) / np.linalg.norm(w)
                      for _ in range(fiber_grid)]
        xj, Ej, u0 = jnp.asarray(np.asarray(x, dtype=float)), jnp.asarray(E), jnp.zeros(n)
        for w in fibers:
            wj = jnp.asarray(w)
            Hvv = np.asarray(ops.d2vv(xj, Ej, u0, wj))
            ev = np.linalg.eigvalsh(0.5 * (Hvv + Hvv.T))
            c1 = min(c1, float(ev[0]))
            Hxx = np.asarray(ops.d2xx(xj, Ej, u0, wj))
            Hxv = np.asarray(ops.d2xv(xj, Ej, u0, wj))
            nv = float(np.linalg.norm(w))
            c2 = max(
                c2,
                float(np.abs(Hxx).max()) / (1.0 + nv**2),
                float(np.abs(Hxv).max()) / (1.0 + nv),
                float(np.abs(Hvv).max()),
            )
            count += 1

    report = {
        "C1": float(c1),
        "C2": float(c2),
        "pass": bool(c1 > 0.0),
        "samples": count,
        "region": "fiber radii 0.5-2 at sampled base points",
    }
    if c1 <= 0.0:
        raise StrongConvexityViolated(f"min fiber-Hessian eigenvalue {c1:.3e} <= 0")
    return report


def _retract_jax(man: ManifoldModel, x, v):
    """jax-traceable retraction used inside chart derivatives."""
    if isinstance(man, (EuclideanSpace, FlatTorus)):
        return x + v
    if isinstance(man, Sphere):
        from ._kernels import sphere_exp

        return sphere_exp(man.radius, x, v)
    raise NotImplementedError(type(man))
