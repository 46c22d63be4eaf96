"""jax kernels: exact derivatives of the discrete path energy and of chart
Lagrangians.

Everything variational reduces to per-segment functions of the two endpoint
coefficient vectors; jax supplies machine-exact gradients and Hessians which
are vmapped over segments and assembled into block-tridiagonal arrays on the
numpy side.  Builders are cached per (metric, manifold-kind) so jit traces
once per shape.
"""
from __future__ import annotations

import functools
from types import SimpleNamespace

import jax
import jax.numpy as jnp
import numpy as np
import scipy.sparse as sp

jax.config.update("jax_enable_x64", True)

KIND_FLAT = "flat"
KIND_SPHERE = "sphere"


def manifold_kind(man) -> tuple:
    """(tag, radius) pair used to key the kernel cache."""
    from .manifold import EuclideanSpace, FlatTorus, Sphere

    if isinstance(man, (EuclideanSpace, FlatTorus)):
        return (KIND_FLAT, 0.0)
    if isinstance(man, Sphere):
        return (KIND_SPHERE, float(man.radius))
    raise NotImplementedError(type(man))


# -- closed-form sphere maps, jax-traceable ---------------------------------
# series-safe in squared norms so that nested jax derivatives are clean at 0


def _cos_sqrt(s):
    safe = s > 1e-12
    ssafe = jnp.where(safe, s, 1.0)
    return jnp.where(safe, jnp.cos(jnp.sqrt(ssafe)), 1.0 - s / 2.0 + s**2 / 24.0)


def _sinc_sqrt(s):
    """sin(sqrt(s)) / sqrt(s)."""
    safe = s > 1e-12
    ssafe = jnp.where(safe, s, 1.0)
    return jnp.where(safe, jnp.sin(jnp.sqrt(ssafe)) / jnp.sqrt(ssafe), 1.0 - s / 6.0 + s**2 / 120.0)


def _acos_over_sin(c):
    """arccos(c) / sqrt(1 - c^2), smooth at c -> 1."""
    e = 1.0 - c
    safe = e > 1e-8
    csafe = jnp.where(safe, c, 0.0)
    main = jnp.arccos(csafe) / jnp.sqrt(1.0 - csafe**2)
    taylor = 1.0 + e / 3.0 + 2.0 * e**2 / 15.0
    return jnp.where(safe, main, taylor)


def sphere_exp(r, x, v):
    s = jnp.dot(v, v) / r**2
    return _cos_sqrt(s) * x + _sinc_sqrt(s) * v


def sphere_log(r, x, y):
    c = jnp.clip(jnp.dot(x, y) / r**2, -1.0, 1.0)
    return _acos_over_sin(c) * (y - c * x)


def sphere_mid(r, x, y):
    m = x + y
    return r * m / jnp.linalg.norm(m)


# -- per-segment energy -------------------------------------------------------


def _segment_fn(metric, kind: str, radius: float):
    """seg(h, b0, b1, E0, E1, xi0, xi1) -> h * F^2(midpoint, velocity)."""
    if kind == KIND_FLAT:

        def seg(h, b0, b1, E0, E1, xi0, xi1):
            y0 = b0 + xi0 @ E0
            y1 = b1 + xi1 @ E1
            mid = 0.5 * (y0 + y1)
            vel = (y1 - y0) / h
            return h * metric.f2(mid, vel)

    elif kind == KIND_SPHERE:

        def seg(h, b0, b1, E0, E1, xi0, xi1):
            y0 = sphere_exp(radius, b0, xi0 @ E0)
            y1 = sphere_exp(radius, b1, xi1 @ E1)
            m = sphere_mid(radius, y0, y1)
            vel = (sphere_log(radius, m, y1) - sphere_log(radius, m, y0)) / h
            return h * metric.f2(m, vel)

    else:
        raise NotImplementedError(kind)
    return seg


@functools.lru_cache(maxsize=None)
def segment_ops(metric, kind: str, radius: float) -> SimpleNamespace:
    seg = _segment_fn(metric, kind, radius)

    def seg_z(h, b0, b1, E0, E1, z):
        n = E0.shape[0]
        return seg(h, b0, b1, E0, E1, z[:n], z[n:])

    in_axes = (None, 0, 0, 0, 0, 0)
    energy = jax.jit(
        lambda h, B0, B1, F0, F1, Z: jnp.sum(jax.vmap(seg_z, in_axes=in_axes)(h, B0, B1, F0, F1, Z))
    )
    grads = jax.jit(jax.vmap(jax.grad(seg_z, argnums=5), in_axes=in_axes))
    hessians = jax.jit(jax.vmap(jax.hessian(seg_z, argnums=5), in_axes=in_axes))
    return SimpleNamespace(energy=energy, grads=grads, hessians=hessians)


def _segment_inputs(bases, frames, xi):
    B0, B1 = bases[:-1], bases[1:]
    F0, F1 = frames[:-1], frames[1:]
    Z = np.concatenate([xi[:-1], xi[1:]], axis=1)
    return B0, B1, F0, F1, Z


def energy_value(ops, h, bases, frames, xi) -> float:
    B0, B1, F0, F1, Z = _segment_inputs(bases, frames, xi)
    return float(ops.energy(h, B0, B1, F0, F1, Z))


def energy_differential(ops, h, bases, frames, xi) -> np.ndarray:
    """d(energy)/d(xi) as a (K+1, n) array of covector blocks."""
    B0, B1, F0, F1, Z = _segment_inputs(bases, frames, xi)
    G = np.asarray(ops.grads(h, B0, B1, F0, F1, Z))
    K1, n = xi.shape
    r = np.zeros((K1, n))
    r[:-1] += G[:, :n]
    r[1:] += G[:, n:]
    return r


def segment_hessians(ops, h, bases, frames, xi) -> np.ndarray:
    B0, B1, F0, F1, Z = _segment_inputs(bases, frames, xi)
    return np.asarray(ops.hessians(h, B0, B1, F0, F1, Z))


def assemble_hessian(H_seg: np.ndarray, K: int, n: int) -> np.ndarray:
    """Block-tridiagonal dense Hessian from per-segment (2n, 2n) blocks."""
    N = (K + 1) * n
    B = np.zeros((N, N))
    for j in range(K):
        s0, s1 = slice(j * n, (j + 1) * n), slice((j + 1) * n, (j + 2) * n)
        B[s0, s0] += H_seg[j, :n, :n]
        B[s0, s1] += H_seg[j, :n, n:]
        B[s1, s0] += H_seg[j, n:, :n]
        B[s1, s1] += H_seg[j, n:, n:]
    return 0.5 * (B + B.T)


def assemble_pform(H_seg: np.ndarray, K: int, n: int, h: float) -> np.ndarray:
    """Positive part: velocity-Hessian quadrature plus the L^2 mass term.

    A_j = (h/4)(H11 - H10 - H01 + H00) recovers the chart Lagrangian's fiber
    Hessian at the segment state from the segment Hessian blocks.
    """
    N = (K + 1) * n
    P = np.zeros((N, N))
    quarter = 0.25 * h * np.eye(n)
    for j in range(K):
        Hj = H_seg[j]
        A = 0.25 * h * (Hj[n:, n:] - Hj[n:, :n] - Hj[:n, n:] + Hj[:n, :n])
        A = 0.5 * (A + A.T)
        s0, s1 = slice(j * n, (j + 1) * n), slice((j + 1) * n, (j + 2) * n)
        D = A / h
        P[s0, s0] += D + quarter
        P[s1, s1] += D + quarter
        P[s0, s1] += -D + quarter
        P[s1, s0] += -D + quarter
    return 0.5 * (P + P.T)


def segment_xv_gradients(ops, h, bases, frames, xi):
    """(d_x L, d_v L) of the chart Lagrangian at each segment state.

    From the segment gradient halves: d_v = (g1 - g0)/2, d_x = (g0 + g1)/h.
    """
    B0, B1, F0, F1, Z = _segment_inputs(bases, frames, xi)
    G = np.asarray(ops.grads(h, B0, B1, F0, F1, Z))
    n = xi.shape[1]
    g0, g1 = G[:, :n], G[:, n:]
    return (g0 + g1) / h, (g1 - g0) / 2.0


def gram_matrix(K: int, n: int, h: float, m_scale: float = 1.0) -> np.ndarray:
    """Discrete H^1 Gram with the same midpoint stencil as the energy:
    <xi, eta>_1 = sum_j h [ m^2 xibar_j . etabar_j + Dxi_j . Deta_j ]."""
    N = (K + 1) * n
    M = np.zeros((N, N))
    I = np.eye(n)
    mass = 0.25 * h * m_scale**2 * I
    stiff = I / h
    for j in range(K):
        s0, s1 = slice(j * n, (j + 1) * n), slice((j + 1) * n, (j + 2) * n)
        M[s0, s0] += mass + stiff
        M[s1, s1] += mass + stiff
        M[s0, s1] += mass - stiff
        M[s1, s0] += mass - stiff
    return M


def constraint_matrix(K: int, n: int, kind: str, E: np.ndarray = None,
                      A0: np.ndarray = None, A1: np.ndarray = None) -> sp.csr_matrix:
    """Sparse map from reduced coordinates to the full (K+1)*n coefficients.

    kind 'twisted': free nodes 0..K-1, node K = E @ node 0.
    kind 'submanifold': node 0 = A0 @ u0, node K = A1 @ u1, interior free.
    """
    rows, cols, vals = [], [], []
    if kind == "twisted":
        nred = K * n
        for j in range(K):
            for a in range(n):
                rows.append(j * n + a)
                cols.append(j * n + a)
                vals.append(1.0)
        for a in range(n):
            for b in range(n):
                if E[a, b] != 0.0:
                    rows.append(K * n + a)
                    cols.append(b)
                    vals.append(float(E[a, b]))
    elif kind == "submanifold":
        d0, d1 = A0.shape[1], A1.shape[1]
        nred = d0 + (K - 1) * n + d1
        for a in range(n):
            for b in range(d0):
                rows.append(a)
                cols.append(b)
                vals.append(float(A0[a, b]))
        for j in range(1, K):
            for a in range(n):
                rows.append(j * n + a)
                cols.append(d0 + (j - 1) * n + a)
                vals.append(1.0)
        for a in range(n):
            for b in range(d1):
                rows.append(K * n + a)
                cols.append(d0 + (K - 1) * n + b)
                vals.append(float(A1[a, b]))
    else:
        raise ValueError(kind)
    return sp.csr_matrix((vals, (rows, cols)), shape=((K + 1) * n, nred))


def reduce_form(T: sp.csr_matrix, B: np.ndarray) -> np.ndarray:
    return np.asarray(T.T @ (T.T @ B.T).T)


def reduce_vector(T: sp.csr_matrix, r: np.ndarray) -> np.ndarray:
    return np.asarray(T.T @ r.reshape(-1))


def expand_vector(T: sp.csr_matrix, w: np.ndarray, K: int, n: int) -> np.ndarray:
    return np.asarray(T @ w).reshape(K + 1, n)


# ---------------------------------------------------------------------------
# chart Lagrangian kernels for the connection module
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def chart_ops(metric, kind: str, radius: float) -> SimpleNamespace:
    """Normal-coordinate chart machinery at a base point: the chart Lagrangian
    Lt(u, v) = F^2(phi(u), dphi(u) v), its fiber metric, the formal and Chern
    Christoffel symbols, and the geodesic acceleration."""

    if kind == KIND_FLAT:

        def phi(x0, E, u):
            return x0 + u @ E

    else:

        def phi(x0, E, u):
            return sphere_exp(radius, x0, u @ E)

    def lt(x0, E, u, v):
        base = phi(x0, E, u)
        amb = jax.jvp(lambda w: phi(x0, E, w), (u,), (v,))[1]
        return metric.f2(base, amb)

    def gab(x0, E, u, y):
        return 0.5 * jax.hessian(lambda v: lt(x0, E, u, v))(y)

    def cartan(x0, E, u, y):
        return 0.25 * jax.jacfwd(jax.hessian(lambda v: lt(x0, E, u, v)))(y)

    def christoffels(x0, E, u, y):
        g = gab(x0, E, u, y)
        gi = jnp.linalg.inv(g)
        dg = jax.jacfwd(lambda uu: gab(x0, E, uu, y))(u)  # dg[a, b, k] = d_k g_ab
        # gamma^i_jm = 1/2 g^{is} (d_m g_sj - d_s g_jm + d_j g_ms)
        gamma = 0.5 * (
            jnp.einsum("is,sjm->ijm", gi, dg)
            - jnp.einsum("is,jms->ijm", gi, dg)
            + jnp.einsum("is,msj->ijm", gi, dg)
        )
        C = cartan(x0, E, u, y)
        Cup = jnp.einsum("il,ljm->ijm", gi, C)
        Ny = jnp.einsum("ijm,m->ij", gamma, y) - jnp.einsum(
            "ijm,m->ij", Cup, jnp.einsum("mrs,r,s->m", gamma, y, y)
        )
        corr = (
            jnp.einsum("ljs,sm->ljm", C, Ny)
            - jnp.einsum("jms,sl->ljm", C, Ny)
            + jnp.einsum("mls,sj->ljm", C, Ny)
        )
        Gamma = gamma - jnp.einsum("il,ljm->ijm", gi, corr)
        return gamma, Ny, Gamma

    def accel(x0, E, u, v):
        _, _, Gamma = christoffels(x0, E, u, v)
        return -jnp.einsum("ijm,j,m->i", Gamma, v, v)

    return SimpleNamespace(
        lt=jax.jit(lt),
        gab=jax.jit(gab),
        cartan=jax.jit(cartan),
        christoffels=jax.jit(christoffels),
        accel=jax.jit(accel),
        phi=jax.jit(phi),
        d2xx=jax.jit(jax.hessian(lt, argnums=2)),
        d2xv=jax.jit(jax.jacfwd(jax.grad(lt, argnums=2), argnums=3)),
        d2vv=jax.jit(jax.hessian(lt, argnums=3)),
    )
