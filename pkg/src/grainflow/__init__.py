"""Multi-phase mean curvature flow of labeled planar networks."""

from .geometry import GrainLabel, GrainSummary, LabeledNetwork, TopologyError
from .kernels import HeatKernelQuery, KernelSuite, WeightOmega
from .varifold import CurvatureField, DiscreteVarifold

__all__ = [
    "CurvatureField",
    "DiscreteVarifold",
    "GrainLabel",
    "GrainSummary",
    "HeatKernelQuery",
    "KernelSuite",
    "LabeledNetwork",
    "TopologyError",
    "WeightOmega",
]

__version__ = "0.1.0"
