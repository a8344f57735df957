"""PDE data generators: random fields, solvers and dataset containers."""
from .allen_cahn import BlowUpError, SolverSpec, energy, solve_allen_cahn
from .darcy import ConvergenceError, darcy_coefficient, solve_darcy
from .dataset import Dataset, build_dataset, load_dataset, make_pairs
from .grf import GRFSpec, eigenvalues, grf_batch, grf_coefficients, grf_sample, render
from .navier_stokes import NS_DESK, NS_FINE, sinusoidal_forcing, solve_ns_vorticity

__all__ = [
    "BlowUpError", "SolverSpec", "energy", "solve_allen_cahn",
    "ConvergenceError", "darcy_coefficient", "solve_darcy",
    "Dataset", "build_dataset", "load_dataset", "make_pairs",
    "GRFSpec", "eigenvalues", "grf_batch", "grf_coefficients", "grf_sample", "render",
    "NS_DESK", "NS_FINE", "sinusoidal_forcing", "solve_ns_vorticity",
]
