"""Numerical laboratory for quasiperiodic lattice Schrodinger transport.

Lazy attribute loading keeps `import qptransport` free of numpy so the CLI
can pin thread environment variables first.
"""

from importlib import import_module, metadata

_EXPORTS = {
    # model
    "Kernel": ".model",
    "HullFunction": ".model",
    "BaseDynamics": ".model",
    "Volume": ".model",
    "OperatorModel": ".model",
    "DiophantineParams": ".model",
    "check_diophantine": ".model",
    "continued_fraction_denominators": ".model",
    "four_interval_family": ".model",
    "assemble_operator": ".model",
    "as_fixed_phase": ".model",
    "torus_distance": ".model",
    # evolve
    "SpectralData": ".evolve",
    "diagonalize": ".evolve",
    "spectral_data_for": ".evolve",
    "propagator_row": ".evolve",
    "propagator_row_contour": ".evolve",
    "propagate": ".evolve",
    "transport_moments": ".evolve",
    "ballistic_check": ".evolve",
    "truncation_gap": ".evolve",
    # green
    "green_row": ".green",
    "boundary_vertices": ".green",
    "resonant_membership": ".green",
    "resonant_measure": ".green",
    "combes_thomas_fit": ".green",
    "offbox_green_bound": ".green",
    # herglotz
    "RationalFraction": ".herglotz",
    "fraction_from_green": ".herglotz",
    "superlevel_intervals": ".herglotz",
    "superlevel_measure": ".herglotz",
    "FractionFamily": ".herglotz",
    "family_superlevel_measure": ".herglotz",
    "poisson_average": ".herglotz",
    "poisson_mass": ".herglotz",
    "offaxis_minmax_bound": ".herglotz",
    "half_coverage_selector": ".herglotz",
    # ldt
    "transfer_product": ".ldt",
    "transfer_products": ".ldt",
    "lyapunov": ".ldt",
    "ld_probability": ".ldt",
    "ld_scale_ladder": ".ldt",
    "ld_to_green_bridge": ".ldt",
    "rho_preset": ".ldt",
    "scale_ladder_from_frequency": ".ldt",
    "moment_envelope": ".ldt",
    "moment_bound_from_escape": ".ldt",
    "subsequence_times": ".ldt",
    "fit_envelope_constant": ".ldt",
    # config / harness
    "load_config": ".config",
    "config_from_dict": ".config",
    "build_model": ".config",
    "time_grid": ".config",
    "run_build": ".harness",
    "run_evolve": ".harness",
    "run_green_scan": ".harness",
    "run_ldt": ".harness",
    "run_theorem_check": ".harness",
    "run_moment_scan": ".harness",
    "run_phase_uniformity": ".harness",
    # errors
    "ConfigError": ".errors",
    "NumericalError": ".errors",
    "SingularEnergyError": ".errors",
    "UnsupportedModelError": ".errors",
    "HypothesisUnmet": ".errors",
}

try:
    __version__ = metadata.version("artifact")
except metadata.PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name: str):
    if name in _EXPORTS:
        return getattr(import_module(_EXPORTS[name], __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return __all__
