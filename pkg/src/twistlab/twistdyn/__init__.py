"""Dynamics of cylinder twist maps: rotation numbers, minimal orbits,
invariant circles, instability bands and connecting orbits."""

from .circles import CircleCandidate, DetectParams, OrderWitness, circle_detect, classify_orbit
from .connect import ConnectionCandidate, ConnectionFailure, connect_search
from .generating import (GeneratingTable, LagrangianGenerating, ShearGenerating, ShootingError,
                         factor_generating, generating_action)
from .maps import (CylinderMap, EulerLagrangeMap, OrbitEscape, RigidRotation, ShearMap,
                   StandardMap)
from .minimal import OrbitConfiguration, minimal_periodic_orbit
from .reconstruct import GeodesicTrack, geodesic_reconstruct
from .rotation import RotationEstimate, rotation_number
from .scan import AbsenceReport, InstabilityBand, instability_scan

__all__ = [
    "AbsenceReport", "CircleCandidate", "ConnectionCandidate", "ConnectionFailure",
    "CylinderMap", "DetectParams", "EulerLagrangeMap", "GeneratingTable", "GeodesicTrack",
    "InstabilityBand", "LagrangianGenerating", "OrbitConfiguration", "OrbitEscape",
    "OrderWitness", "RigidRotation", "RotationEstimate", "ShearGenerating", "ShearMap",
    "ShootingError", "StandardMap", "circle_detect", "classify_orbit", "connect_search",
    "factor_generating", "generating_action", "geodesic_reconstruct", "instability_scan",
    "minimal_periodic_orbit", "rotation_number",
]
