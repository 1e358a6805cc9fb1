"""momentlab: a computational laboratory for spectral moments of finite
non-Hermitian lattices.

Builds tight-binding models with arbitrary boundary closures, computes
boundary-robust spectral moments next to their strongly boundary-sensitive
spectra, counts the closed walks behind the finite-size corrections,
reconstructs complex spectra from synthetic Green's-function sweeps, and
classifies driven wave-packet dynamics as dispersive or proliferative.
"""

__version__ = "0.1.0"

from .lattice import (
    AxisClosure,
    BoundarySpec,
    HamiltonianMatrix,
    LatticeDomain,
    LatticeModel,
    assemble,
    bloch_eval,
    build_domain,
    letter_mask,
    model_from_hoppings,
)
from .linalg import (
    ComplexSpectrum,
    eigenvalues,
    resolvent,
    shifted_power_trace,
    shifted_power_trace_series,
)
from .moments import (
    BulkMoments,
    DeviationSeries,
    MomentSeries,
    PowerLawFit,
    bulk_moments,
    deviations,
    eigen_moments,
    fit_power_law,
    hausdorff_distance,
    moment_collapse_spread,
    spectral_scale,
)
from .walks import (
    DecompositionReport,
    WalkLedger,
    boundary_distance,
    bulk_walk_weight,
    decomposition_check,
    missing_weight,
    rooted_walk_sum,
    walk_ledger,
)
from .greens import (
    BranchTrajectory,
    PoleEstimate,
    ReconstructionResult,
    ResponseStack,
    default_grid,
    fit_pole,
    matching_distance,
    reconstruct_spectrum,
    synth_response,
    track_branches,
)
from .dynamics import (
    EPS_RATE,
    PT_ALPHA_CALIBRATED,
    CriticalGammaResult,
    DriveSpec,
    SaddleAnalysis,
    WaveField,
    bulk_return_rate,
    center_of_mass,
    compensate_normalize,
    critical_gamma,
    duhamel_evolve,
    evolve,
    growth_rate,
    peak_growth_factor,
    pt_model,
    saddle_analysis,
    saddle_growth,
)
from .config import ExperimentConfig, preset, preset_names, validate_config
