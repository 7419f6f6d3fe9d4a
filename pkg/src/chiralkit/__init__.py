"""Singular contact forms, chiral critical points and Beltrami fields in R^3.

Subpackages and modules:

* ``polyform``   exact polynomial differential forms over Q
* ``germ``       Hessian data, indices and obstructions for gradient germs
* ``chirality``  contact defect, chiral perturbations, Beltrami series
* ``metriclab``  star operators with *alpha = beta and explicit metrics
* ``fields``     ABC, singular Lutz and related closed-form families
* ``surface``    level-set topology, dividing sets, surface constructions
* ``flow``       orbit tracing, periodic and zero-connecting orbits
* ``cli``        the ``chiralkit`` command
"""
from .errors import (
    ChiralkitError,
    ContractViolation,
    IndefiniteDefect,
    NonCriticalOrigin,
    NonIntegralDegree,
    NonRegularValue,
    NotClosed,
    NotHarmonic,
    ParseError,
    TransversalityFailure,
    WrongSign,
    ZeroOnSphere,
)
from .polyform import (
    DifferentialForm,
    Polynomial,
    PolyVectorField,
    ext_d,
    hodge_euclid,
    interior,
    parse_polynomial,
    poincare_homotopy,
    wedge,
)

__version__ = "0.1.0"

__all__ = [
    "ChiralkitError", "ContractViolation", "IndefiniteDefect", "NonCriticalOrigin",
    "NonIntegralDegree", "NonRegularValue", "NotClosed", "NotHarmonic", "ParseError",
    "TransversalityFailure", "WrongSign", "ZeroOnSphere",
    "DifferentialForm", "Polynomial", "PolyVectorField", "ext_d", "hodge_euclid", "interior",
    "parse_polynomial", "poincare_homotopy", "wedge", "__version__",
]
