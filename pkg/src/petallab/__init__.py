"""petallab: computational petal domains, Fatou coordinates and blow-up
resolution for tangent-to-the-identity germs of (C^2, 0)."""

__version__ = "0.1.0"

from .errors import PetallabError
from .sectors import (
    DomainSpec,
    PetalParams,
    SectorSpec,
    bezout_exponents,
    branch_g,
    domain_membership,
    principal_power,
    sector_membership,
)
from .germs import (
    FormSignature,
    PolyMapGerm,
    VectorFieldJet,
    classify_form,
    corner_germ,
    formal_log,
    invert_jet,
    normalize,
)
from .flows import FlowMap, closed_form_flow, truncated_flow_germ

__all__ = [
    "PetallabError",
    "SectorSpec",
    "PetalParams",
    "DomainSpec",
    "principal_power",
    "sector_membership",
    "bezout_exponents",
    "branch_g",
    "domain_membership",
    "PolyMapGerm",
    "FormSignature",
    "VectorFieldJet",
    "classify_form",
    "normalize",
    "invert_jet",
    "formal_log",
    "corner_germ",
    "FlowMap",
    "closed_form_flow",
    "truncated_flow_germ",
]
