"""Unambiguous discrimination of non-orthogonal spatial modes with a
simulated multi-plane light converter.

The package covers scalar free-space optics on a sampled grid
(:mod:`.optics`, :mod:`.propagation`), the linear algebra of symmetric
state sets and their unambiguous measurement (:mod:`.states`), phase-mask
design by wavefront matching (:mod:`.mplc`), virtual experiments
(:mod:`.experiment`) and file formats plus a command-line front end
(:mod:`.fileio`, :mod:`.cli`).
"""

from importlib import resources

from .errors import ConstructionViolated, DegenerateInput, InvalidArgument, NoSolution, ResolutionWarning
from .experiment import (
    Geometry,
    SorterDesign,
    build_sorter,
    classification_accuracy,
    confusion_matrix,
    correction_vector,
    error_probability,
    image_usd,
    simulate_outcomes,
    usd_vs_mesd_report,
)
from .mplc import MPLCSystem, WFMOptions, WFMReport, wavefront_match
from .optics import Field, Grid, ModeBasis, gaussian_spot, hermite_gaussian, inner_product, make_grid
from .propagation import propagate
from .states import (
    ideal_outcome_matrix,
    mesd_bound,
    symmetric_frame,
    symmetric_states,
    theta_for_fidelity,
    usd_measurement,
)

__version__ = "0.1.0"


def data_path(name: str):
    """Path of a file shipped in the package ``data`` directory."""
    return resources.files(__name__).joinpath("data", name)


__all__ = [
    "ConstructionViolated",
    "DegenerateInput",
    "Field",
    "Geometry",
    "Grid",
    "InvalidArgument",
    "MPLCSystem",
    "ModeBasis",
    "NoSolution",
    "ResolutionWarning",
    "SorterDesign",
    "WFMOptions",
    "WFMReport",
    "build_sorter",
    "classification_accuracy",
    "confusion_matrix",
    "correction_vector",
    "data_path",
    "error_probability",
    "gaussian_spot",
    "hermite_gaussian",
    "ideal_outcome_matrix",
    "image_usd",
    "inner_product",
    "make_grid",
    "mesd_bound",
    "propagate",
    "simulate_outcomes",
    "symmetric_frame",
    "symmetric_states",
    "theta_for_fidelity",
    "usd_measurement",
    "usd_vs_mesd_report",
    "wavefront_match",
]
