"""Finsler geodesics on model manifolds: energy calculus, Morse index and
Bott-type iteration invariants, and finite-dimensional reduction at critical
points and orbits."""

from . import errors
from .manifold import (
    EuclideanSpace,
    FlatTorus,
    Sphere,
    Identity,
    TorusTranslation,
    TorusLatticeAutomorphism,
    SphereRotation,
    Composition,
    isometry_apply,
    isometry_differential,
    validate_isometry,
)
from .finsler import (
    RiemannianSquareRoot,
    Randers,
    PerturbedRiemannian,
    fundamental_tensor,
    cartan_tensor,
    check_conditions,
    check_invariance,
)

__all__ = [
    "errors",
    "EuclideanSpace", "FlatTorus", "Sphere",
    "Identity", "TorusTranslation", "TorusLatticeAutomorphism", "SphereRotation", "Composition",
    "isometry_apply", "isometry_differential", "validate_isometry",
    "RiemannianSquareRoot", "Randers", "PerturbedRiemannian",
    "fundamental_tensor", "cartan_tensor", "check_conditions", "check_invariance",
]

__version__ = "0.1.0"
