"""Covariance and rotation tracking on matrix manifolds.

The core estimator propagates an SPD matrix with a fixed eigenvalue
spectrum by rotating its eigenbasis, driven by a whitened commutator
torque and a latent angular-velocity state.  Four classical baselines,
deterministic synthetic data generators, a benchmark harness and a
region-covariance video pipeline round out the package.
"""

from .geometry import (
    NoiseModel,
    OrbitState,
    Spectrum,
    angular_error_deg_spd2,
    curvature_closed_form,
    geodesic_error_deg_so3,
    inertia_inverse,
    orbit_log,
    torque,
    whiten,
    whitened_spectral_gap,
    wishart_nll,
)
from .linalg import (
    BranchCutError,
    ConvergenceError,
    EigDecomp,
    commutator,
    expm_skew,
    frob_inner,
    frob_norm,
    logm_rot,
    nearest_rotation,
    sym_eig,
)
from .bench import (
    FilterRun,
    StabilityMap,
    SweepResult,
    ablation_grid,
    dropout_sweep,
    master_validation,
    omega_sweep,
    run_tracking,
    spectral_gap_sweep,
    stability_map,
)
from .regioncov import (
    BBox,
    FeatureTensor,
    Image,
    build_features,
    decode_pnm,
    encode_pnm,
    iou,
    parse_otb_groundtruth,
    region_covariance,
    track_sequence,
)
from .trackers import (
    AlphaBeta,
    EuclideanEMA,
    KGMRFTracker,
    RiemannianEMA,
    RotationAlphaBeta,
    RotationEMA,
    RotationEuclideanEMA,
    RotationKGMRF,
    RotationTangentKF,
    TangentKF,
    kappa_max_estimate,
    stability_check,
)

__version__ = "0.1.0"

__all__ = [
    "NoiseModel",
    "OrbitState",
    "Spectrum",
    "angular_error_deg_spd2",
    "curvature_closed_form",
    "geodesic_error_deg_so3",
    "inertia_inverse",
    "orbit_log",
    "torque",
    "whiten",
    "whitened_spectral_gap",
    "wishart_nll",
    "BranchCutError",
    "ConvergenceError",
    "EigDecomp",
    "commutator",
    "expm_skew",
    "frob_inner",
    "frob_norm",
    "logm_rot",
    "nearest_rotation",
    "sym_eig",
    "AlphaBeta",
    "EuclideanEMA",
    "KGMRFTracker",
    "RiemannianEMA",
    "RotationAlphaBeta",
    "RotationEMA",
    "RotationEuclideanEMA",
    "RotationKGMRF",
    "RotationTangentKF",
    "TangentKF",
    "kappa_max_estimate",
    "stability_check",
    "FilterRun",
    "StabilityMap",
    "SweepResult",
    "ablation_grid",
    "dropout_sweep",
    "master_validation",
    "omega_sweep",
    "run_tracking",
    "spectral_gap_sweep",
    "stability_map",
    "BBox",
    "FeatureTensor",
    "Image",
    "build_features",
    "decode_pnm",
    "encode_pnm",
    "iou",
    "parse_otb_groundtruth",
    "region_covariance",
    "track_sequence",
    "__version__",
]
