"""Off-the-grid spike recovery from modulo-folded, coarsely quantized samples."""

from .exact import ExactParams, max_sampling_step, recover_exact, unfold_by_differences
from .estimators import ExactRecovery, ModuloADC, SRIterSiS
from .exceptions import ConfigError, DegenerateError, NotFittedError, TruncationError
from .forward import SampledSignal, SceneSpec, SpikeTrain, fidelity, make_tof_scene, synthesize
from .frontend import AcquisitionConfig, FoldedSignal, ResidueModel, acquire, modular_decompose, modulo_fold
from .itersis import ItersisConfig, ItersisResult, itersis_recover, solve_p2
from .kernels import KernelModel, approximation_error_bound, derivative_sup_bound, favard_constant

__version__ = "0.1.0"

__all__ = [
    "AcquisitionConfig",
    "ConfigError",
    "DegenerateError",
    "ExactParams",
    "ExactRecovery",
    "FoldedSignal",
    "ItersisConfig",
    "ItersisResult",
    "KernelModel",
    "ModuloADC",
    "NotFittedError",
    "ResidueModel",
    "SRIterSiS",
    "SampledSignal",
    "SceneSpec",
    "SpikeTrain",
    "TruncationError",
    "acquire",
    "approximation_error_bound",
    "derivative_sup_bound",
    "favard_constant",
    "fidelity",
    "itersis_recover",
    "make_tof_scene",
    "max_sampling_step",
    "modular_decompose",
    "modulo_fold",
    "recover_exact",
    "solve_p2",
    "synthesize",
    "unfold_by_differences",
]
