"""Commitment-consistent MPC pipeline for auditable machine learning."""

__version__ = "0.1.0"

from .algebra import FieldElement, Polynomial, RingElement
from .fixedpoint import FxFormat
from .groups import get_backend
from .mpc import Abb, Domain, PartyId, SharedVector
from .pipeline import ArcPipeline, AuditOutcome, AuditRequest, PhaseAbort, Scenario

__all__ = [
    "Abb",
    "ArcPipeline",
    "AuditOutcome",
    "AuditRequest",
    "Domain",
    "FieldElement",
    "FxFormat",
    "PartyId",
    "PhaseAbort",
    "Polynomial",
    "RingElement",
    "Scenario",
    "SharedVector",
    "get_backend",
]
