"""Contact force/torque estimation for vision-based tactile sensors.

Pipeline: marker tracking -> gridded displacement field -> natural
Helmholtz-Hodge decomposition -> scalar features (s_n, s_t, s_tau) ->
calibrated wrench -> contact-phase classification and grasp-force control.
"""

from .field import (
    FieldFormatError,
    GridSpec,
    ScalarField2D,
    VectorField2D,
    VectorSum,
    curl_z,
    divergence,
    gradient,
    moment_sum,
    norm_of_sum,
    read_scalar_field,
    read_vector_field,
    rotate_quarter,
    sum_norms,
    write_scalar_field,
    write_vector_field,
)
from .nhhd import (
    Decomposition,
    RotationCenter,
    SolverLimitError,
    decompose,
    export_decomposition,
    greens_kernel,
    locate_rotation_centers,
    solve_poisson_freespace,
)
from .features import (
    FeatureTriple,
    batch_features,
    compute_features,
    feature_crosstalk_report,
    features_from_decomposition,
)
from .surrogate import (
    DatasetSample,
    LoadRanges,
    LoadTriple,
    SurrogateConfig,
    export_dataset,
    gen_calibration_dataset,
    gen_divergence_pattern,
    gen_rotational_pattern,
    gen_unidirectional_pattern,
    load_dataset,
    render_load,
)
from .ingest import (
    MarkerSet,
    TrackState,
    displacements,
    init_tracks,
    rbf_interpolate,
    read_marker_stream,
    track_update,
)
from .calib import (
    CVReport,
    LinearModel,
    MLPModel,
    ModelSpec,
    RansacFitError,
    TrainingDivergedError,
    WrenchEstimate,
    cross_validate,
    dataset_to_arrays,
    estimate_wrench,
    gradient_check,
    load_model,
    mlp_fit,
    mlp_init,
    mlp_loss,
    predict,
    ransac_fit,
    report_rows,
    rmse,
    save_model,
)
from .grasp import (
    ContactPhase,
    ControllerConfig,
    FrictionModel,
    GraspState,
    PlantParams,
    Scenario,
    SimResult,
    above_band_runs,
    classify_phase,
    cone_check,
    controller_step,
    make_pipeline_estimator,
    plot_ratio_trace,
    read_scenario,
    read_trace_csv,
    simulate_holding,
    write_trace_csv,
)

__version__ = "0.1.0"
