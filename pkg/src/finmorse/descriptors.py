"""Dict descriptors for manifolds, metrics, isometries, boundary conditions
and initial paths; shared by the experiment runner and path serialization."""
from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .finsler import PerturbedRiemannian, Randers, RiemannianSquareRoot
from .manifold import (Composition, EuclideanSpace, FlatTorus, Identity, Isometry,
                       ManifoldModel, Sphere, SphereRotation, TorusLatticeAutomorphism,
                       TorusTranslation)
from .pathspace import (DiscretePath, FixedPoint, GreatSubsphere, IsometryGraph,
                        Periodic, SubTorus, SubmanifoldPair, great_circle_arc,
                        torus_line)


def _need(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigError(f"{path}.{key}: missing")
    return d[key]


def manifold_from_dict(d: dict, path: str = "manifold") -> ManifoldModel:
    kind = _need(d, "kind", path)
    if kind == "flat_torus":
        periods = tuple(float(p) for p in _need(d, "periods", path))
        if any(p <= 0 for p in periods):
            raise ConfigError(f"{path}.periods: must be positive")
        return FlatTorus(periods)
    if kind == "sphere":
        dim = int(d.get("dim", 2))
        if dim < 2:
            raise ConfigError(f"{path}.dim: index computations assume dim >= 2")
        return Sphere(dim, float(d.get("radius", 1.0)))
    if kind == "euclidean":
        return EuclideanSpace(int(_need(d, "dim", path)))
    raise ConfigError(f"{path}.kind: unknown manifold kind {kind!r}")


def manifold_to_dict(man: ManifoldModel) -> dict:
    if isinstance(man, FlatTorus):
        return {"kind": "flat_torus", "periods": list(man.periods)}
    if isinstance(man, Sphere):
        return {"kind": "sphere", "dim": man.dim, "radius": man.radius}
    if isinstance(man, EuclideanSpace):
        return {"kind": "euclidean", "dim": man.dim}
    raise TypeError(type(man))


def metric_from_dict(d: dict, man: ManifoldModel, path: str = "metric"):
    kind = _need(d, "kind", path)
    mode = d.get("derivative_mode", "closed-form")
    if mode not in ("closed-form", "fd"):
        raise ConfigError(f"{path}.derivative_mode: must be 'closed-form' or 'fd'")
    if kind == "riemannian":
        return RiemannianSquareRoot(man, mode)
    if kind == "randers":
        return Randers(man, mode, beta=tuple(float(b) for b in _need(d, "beta", path)))
    if kind == "perturbed":
        return PerturbedRiemannian(man, mode, epsilon=float(d.get("epsilon", 0.05)))
    raise ConfigError(f"{path}.kind: unknown metric kind {kind!r}")


def metric_to_dict(metric) -> dict:
    if isinstance(metric, RiemannianSquareRoot):
        return {"kind": "riemannian", "derivative_mode": metric.derivative_mode}
    if isinstance(metric, Randers):
        return {"kind": "randers", "beta": list(metric.beta), "derivative_mode": metric.derivative_mode}
    if isinstance(metric, PerturbedRiemannian):
        return {"kind": "perturbed", "epsilon": metric.epsilon, "derivative_mode": metric.derivative_mode}
    raise TypeError(type(metric))


def isometry_from_dict(d: dict, man: ManifoldModel, path: str = "isometry") -> Isometry:
    kind = _need(d, "kind", path)
    if kind == "identity":
        return Identity()
    if kind == "torus_translation":
        if not isinstance(man, FlatTorus):
            raise ConfigError(f"{path}: torus_translation needs a flat_torus manifold")
        return TorusTranslation(man, tuple(float(a) for a in _need(d, "offset", path)))
    if kind == "torus_automorphism":
        if not isinstance(man, FlatTorus):
            raise ConfigError(f"{path}: torus_automorphism needs a flat_torus manifold")
        return TorusLatticeAutomorphism(man, tuple(map(tuple, _need(d, "matrix", path))))
    if kind == "sphere_rotation":
        if not isinstance(man, Sphere):
            raise ConfigError(f"{path}: sphere_rotation needs a sphere manifold")
        if "angle" in d:
            return SphereRotation.about_z(man, float(d["angle"]))
        return SphereRotation(man, tuple(map(tuple, _need(d, "matrix", path))))
    if kind == "composition":
        parts = tuple(isometry_from_dict(p, man, f"{path}.parts[{i}]")
                      for i, p in enumerate(_need(d, "parts", path)))
        return Composition(parts).simplified()
    raise ConfigError(f"{path}.kind: unknown isometry kind {kind!r}")


def isometry_to_dict(iso: Isometry) -> dict:
    if isinstance(iso, Identity):
        return {"kind": "identity"}
    if isinstance(iso, TorusTranslation):
        return {"kind": "torus_translation", "offset": list(iso.offset)}
    if isinstance(iso, TorusLatticeAutomorphism):
        return {"kind": "torus_automorphism", "matrix": [list(r) for r in iso.matrix]}
    if isinstance(iso, SphereRotation):
        return {"kind": "sphere_rotation", "matrix": [list(r) for r in iso.matrix]}
    if isinstance(iso, Composition):
        return {"kind": "composition", "parts": [isometry_to_dict(p) for p in iso.parts]}
    raise TypeError(type(iso))


def submanifold_from_dict(d: dict, man: ManifoldModel, path: str):
    kind = _need(d, "kind", path)
    if kind == "point":
        return FixedPoint(tuple(float(v) for v in _need(d, "coords", path)))
    if kind == "subtorus":
        return SubTorus(tuple(float(v) for v in _need(d, "base", path)),
                        tuple(map(tuple, _need(d, "directions", path))))
    if kind == "great_subsphere":
        return GreatSubsphere(tuple(map(tuple, _need(d, "normals", path))))
    raise ConfigError(f"{path}.kind: unknown submanifold kind {kind!r}")


def submanifold_to_dict(m) -> dict:
    if isinstance(m, FixedPoint):
        return {"kind": "point", "coords": list(m.point)}
    if isinstance(m, SubTorus):
        return {"kind": "subtorus", "base": list(m.base), "directions": [list(r) for r in m.directions]}
    if isinstance(m, GreatSubsphere):
        return {"kind": "great_subsphere", "normals": [list(r) for r in m.normals]}
    raise TypeError(type(m))


def bc_from_dict(d: dict, man: ManifoldModel, path: str = "boundary"):
    kind = _need(d, "kind", path)
    if kind == "periodic":
        return Periodic()
    if kind == "isometry_graph":
        return IsometryGraph(isometry_from_dict(_need(d, "isometry", path), man, f"{path}.isometry"))
    if kind == "submanifold_pair":
        return SubmanifoldPair(
            submanifold_from_dict(_need(d, "m0", path), man, f"{path}.m0"),
            submanifold_from_dict(_need(d, "m1", path), man, f"{path}.m1"),
        )
    raise ConfigError(f"{path}.kind: unknown boundary kind {kind!r}")


def bc_to_dict(bc) -> dict:
    if isinstance(bc, Periodic):
        return {"kind": "periodic"}
    if isinstance(bc, IsometryGraph):
        return {"kind": "isometry_graph", "isometry": isometry_to_dict(bc.iso)}
    if isinstance(bc, SubmanifoldPair):
        return {"kind": "submanifold_pair", "m0": submanifold_to_dict(bc.m0), "m1": submanifold_to_dict(bc.m1)}
    raise TypeError(type(bc))


def initial_path_from_dict(d: dict, man: ManifoldModel, bc, K: int, rng,
                           path: str = "initial_path") -> DiscretePath:
    kind = _need(d, "kind", path)
    if kind == "torus_line":
        p = torus_line(man, _need(d, "winding", path), d.get("base"), K=K, bc=bc)
    elif kind == "great_circle":
        p = great_circle_arc(man, _need(d, "p", path), _need(d, "q", path),
                             arc=float(d.get("arc", 1.0)), K=K, bc=bc,
                             phase=float(d.get("phase", 0.0)))
    elif kind == "nodes":
        p = DiscretePath(man, np.asarray(_need(d, "nodes", path), dtype=float), bc)
    else:
        raise ConfigError(f"{path}.kind: unknown initial path kind {kind!r}")
    amp = float(d.get("perturb", 0.0))
    if amp > 0.0:
        p = fourier_perturb(p, amp, modes=int(d.get("modes", 3)), rng=rng)
    return p


def fourier_perturb(path: DiscretePath, amplitude: float, modes: int = 3, rng=None) -> DiscretePath:
    """Retract a random low-frequency tangent field off the path (preserves
    the boundary condition kind)."""
    rng = rng or np.random.default_rng(0)
    man = path.manifold
    K = path.K
    t = np.arange(K + 1) / K
    n = man.intrinsic_dim
    coeff = np.zeros((K + 1, n))
    for k in range(1, modes + 1):
        ak = rng.standard_normal(n) / k
        bk = rng.standard_normal(n) / k
        coeff += np.outer(np.cos(2 * np.pi * k * t), ak) + np.outer(np.sin(2 * np.pi * k * t), bk)
    coeff *= amplitude
    nodes = np.array(path.nodes)
    from .pathspace import IsometryGraph, Periodic, SubmanifoldPair, _bc_iso

    for j in range(K + 1):
        E = man.frame(nodes[j])
        nodes[j] = man.retract(nodes[j], coeff[j] @ E)
    iso = _bc_iso(path.bc)
    if iso is not None:
        nodes[K] = iso.apply(nodes[0])
    elif isinstance(path.bc, SubmanifoldPair):
        nodes[0], nodes[K] = path.nodes[0], path.nodes[K]
    return path.copy_with(nodes)
