"""Closed-form route to the H^1 gradient.

The discrete Riesz system for the gradient is a constant-coefficient
three-term recurrence in the frame coefficients; its solution is written, as
in the continuum formulas, as a particular part built from exponential-kernel
sweeps plus homogeneous solutions mu^{+-j} whose constant vectors are fixed by
the boundary conditions through a small linear solve per evaluation.  For
twisted boundary conditions the solution is shifted by the explicit
twist-correction field; the per-block affine weights a(t) = (2tS + 2t + 1 - S)/4
appear there, together with the rotation-block constant matrix.
"""
from __future__ import annotations

import numpy as np

from . import _kernels as kr


def a_block(t, S: float):
    """Scalar-block weight of the twist correction: t for S=+1, 1/2 for S=-1."""
    return (2.0 * t * S + 2.0 * t + 1.0 - S) / 4.0


def _block_weight_T(blocks, t: float) -> np.ndarray:
    """Transpose of the block-diagonal weight matrix at time t (column form)."""
    mats = []
    for b in blocks:
        if b[0] == "rot":
            th = b[1]
            alpha = np.sin(th) / (2.0 - 2.0 * np.cos(th))
            J = np.array([[0.0, -1.0], [1.0, 0.0]])
            mats.append((alpha * J - 0.5 * np.eye(2)).T)
        else:
            S = 1.0 if b[0] == "+1" else -1.0
            mats.append(np.array([[a_block(t, S)]]))
    if not mats:
        return np.zeros((0, 0))
    import scipy.linalg as sl

    return sl.block_diag(*mats)


def twist_correction(chart, w=None) -> np.ndarray:
    """Node values of the twist-correction field built from the cumulated
    fiber derivative of the chart Lagrangian."""
    xi = chart.coefficients(w) if w is not None else np.zeros((chart.K + 1, chart.n))
    _, dvL = kr.segment_xv_gradients(chart.ops, chart.h, chart.bases, chart.frames, xi)
    Q = np.zeros((chart.K + 1, chart.n))
    Q[1:] = np.cumsum(chart.h * dvL, axis=0)
    Cbar = Q[-1]
    A = np.array(Q)
    for j in range(chart.K + 1):
        A[j] += _block_weight_T(chart.twist.blocks, j * chart.h) @ Cbar
    return A


def paper_gradient(chart, w=None) -> np.ndarray:
    """Gradient via the closed-form two-point solve; agrees with the direct
    Riesz gradient to roundoff."""
    r = chart.differential_full(w)  # (K+1, n)
    K, n, h = chart.K, chart.n, chart.h
    a = h / 4.0 - 1.0 / h
    b = h / 2.0 + 2.0 / h
    disc = np.sqrt(b * b - 4.0 * a * a)
    mu = (-b - disc) / (2.0 * a)  # a < 0 for h < 2, so mu > 1
    c_green = 1.0 / (a * (1.0 / mu - mu))

    twisted = chart.twist is not None
    if twisted:
        Acorr = twist_correction(chart, w)
        rhs = r - _three_term(Acorr, a, b)
    else:
        Acorr = np.zeros_like(r)
        rhs = np.array(r)

    # particular solution from the interior sources i = 1..K-1
    src = np.zeros_like(rhs)
    src[1:K] = rhs[1:K]
    F = np.zeros_like(rhs)
    for j in range(1, K + 1):
        F[j] = F[j - 1] / mu + src[j]
    Bk = np.zeros_like(rhs)
    for j in range(K - 1, -1, -1):
        Bk[j] = (Bk[j + 1] + src[j + 1]) / mu
    gp = c_green * (F + Bk)

    psi1 = mu ** (np.arange(K + 1) - K)
    psi2 = mu ** (-np.arange(K + 1.0))

    def row0(g):
        return 0.25 * h * (g[0] + g[1]) - (g[1] - g[0]) / h

    def rowK(g):
        return 0.25 * h * (g[K - 1] + g[K]) + (g[K] - g[K - 1]) / h

    if twisted:
        E = chart.twist.E

        def conds(g, inhom: bool):
            c1 = g[K] - E @ g[0] - ((E @ Acorr[0] - Acorr[K]) if inhom else 0.0)
            rhs2 = (r[0] + E.T @ r[K]) - (row0(Acorr) + E.T @ rowK(Acorr)) if inhom else 0.0
            c2 = row0(g) + E.T @ rowK(g) - rhs2
            return np.concatenate([c1, c2])

    else:
        A0, A1 = chart.end_bases
        N0 = _ortho_complement(A0)
        N1 = _ortho_complement(A1)

        def conds(g, inhom: bool):
            parts = [
                N0.T @ g[0],
                A0.T @ (row0(g) - (r[0] if inhom else 0.0)),
                N1.T @ g[K],
                A1.T @ (rowK(g) - (r[K] if inhom else 0.0)),
            ]
            return np.concatenate([p for p in parts if p.size])

    resid0 = conds(gp, True)
    m = len(resid0)
    Mat = np.zeros((m, 2 * n))
    for aidx in range(n):
        e = np.zeros(n)
        e[aidx] = 1.0
        Mat[:, aidx] = conds(np.outer(psi1, e), False)
        Mat[:, n + aidx] = conds(np.outer(psi2, e), False)
    z = np.linalg.solve(Mat, -resid0) if m == 2 * n else np.linalg.lstsq(Mat, -resid0, rcond=None)[0]
    g = gp + np.outer(psi1, z[:n]) + np.outer(psi2, z[n:])
    if twisted:
        g = g + Acorr
    return chart.from_coefficients(g)


def _three_term(g: np.ndarray, a: float, b: float) -> np.ndarray:
    """Interior rows of the Gram operator applied to a node field (boundary
    rows are handled separately through the condition equations)."""
    out = np.zeros_like(g)
    out[1:-1] = a * g[:-2] + b * g[1:-1] + a * g[2:]
    return out


def _ortho_complement(A: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    if A.shape[1] == 0:
        return np.eye(n)
    if A.shape[1] == n:
        return np.zeros((n, 0))
    q, _ = np.linalg.qr(np.hstack([A, np.eye(n)]))
    return q[:, A.shape[1]:n]
