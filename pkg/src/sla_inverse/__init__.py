"""Sequentially linear fracture analysis and inverse identification of
cohesive traction-separation laws on 2D plane-stress models.

Units are N, mm and MPa throughout.
"""

from sla_inverse.cohesive import (
    SawtoothLaw,
    TSCurve,
    average_ts,
    exponential_ts,
    fracture_energy,
    linear_ts,
    sawtooth_from_ts,
    smooth_ts,
    ts_strength_at_secant,
)
from sla_inverse.dataio import LoadingCurve, decimate_curve, load_curve
from sla_inverse.fem import Material, elastic_matrix
from sla_inverse.ident import IdentConfig, IdentTrace, run_inverse, run_multipass
from sla_inverse.mesh import Mesh, generate_compact_tension, generate_notched_beam
from sla_inverse.sla import ForwardResult, run_forward

__all__ = [
    "ForwardResult",
    "IdentConfig",
    "IdentTrace",
    "LoadingCurve",
    "Material",
    "Mesh",
    "SawtoothLaw",
    "TSCurve",
    "average_ts",
    "decimate_curve",
    "elastic_matrix",
    "exponential_ts",
    "fracture_energy",
    "generate_compact_tension",
    "generate_notched_beam",
    "linear_ts",
    "load_curve",
    "run_forward",
    "run_inverse",
    "run_multipass",
    "sawtooth_from_ts",
    "smooth_ts",
    "ts_strength_at_secant",
]

__version__ = "0.1.0"
