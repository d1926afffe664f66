"""Frequency-domain iterative machine learning control.

Learns an LTI plant's frequency response with Gaussian process regression
while iteratively learning the inverse feedforward input for output tracking.
Iteration gains are bounded by the model's predictive uncertainty, and
random-phase excitation keeps identification data flowing at frequencies the
nominal input does not cover.
"""

from .gpr import FitOptions, GprDataset, GprModel, KernelHyperparams
from .ilc import (
    IlcConfig,
    IterationHistory,
    IterationRecord,
    run_baseline,
    run_iml,
    tracking_error,
)
from .model import FrequencyModel, ModelDataStore, ModelSample, model_error
from .plant import (
    NoiseModel,
    RngStream,
    TransferFunction,
    example_plant,
    exact_inverse_input,
    freq_response,
    simulate,
)
from .spectrum import (
    ComplexSpectrum,
    FrequencyGrid,
    TimeSeries,
    TrajectorySpec,
    desired_trajectory,
    forward_transform,
    inverse_transform,
    make_grid,
)

__version__ = "0.1.0"
