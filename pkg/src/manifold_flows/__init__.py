"""Dynamical systems on 3-manifolds: automorphic fields on hyperbolic
quotients, flows continued across side pairings, ideal-tetrahedra gluing
checks and Reeb-foliation constructions."""

from .quaternion import DomainError, HPoint, Quaternion
from .moebius import INFINITY, MoebiusMap, PoleError, TransformClass, classify, derivative_factor
from .group import (
    FundamentalDomain,
    GroupPresentation,
    GroupWord,
    WordBall,
    enumerate_ball,
    example_domain,
    example_presentation,
    locate,
    validate_side_pairing,
)
from .autoform import AutomorphicField, RationalMap, covariance_residual, eval_field, example_field
from .flow import PendulumParams, Trajectory, continuity_residual, integrate_wrapped, klein_bottle_domain

__version__ = "0.1.0"
