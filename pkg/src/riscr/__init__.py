"""Cutoff-rate driven optimization of MIMO precoding and surface phase shifts."""

from .channel import (
    ChannelSet,
    GeometryDistances,
    SystemGeometry,
    assemble_channel,
    compute_distances,
    los_matrix,
    path_loss_direct,
    path_loss_indirect,
    realize_channels,
    sample_rician,
)
from .config import ExperimentConfig, load_config
from .constellation import ConstellationTable, build_alphabet, build_table, enumerate_vectors
from .metrics import (
    DesignPoint,
    RateReport,
    cutoff_rate,
    cutoff_rate_half_noise,
    gaussian_rate,
    mi_lower_bound,
    mutual_information_mc,
    objective_f,
    objective_logf,
    phi,
    rate_report,
)
from .pgm import (
    OptimizerTrace,
    PgmParams,
    grad_p,
    grad_theta,
    line_search_p,
    line_search_theta,
    project_p,
    project_theta,
    random_design_point,
    run_pgm,
)
from .sca import (
    ScaParams,
    boundary_check,
    linearize_phi_p,
    linearize_phi_theta,
    run_sca,
    solve_subproblem_p,
    solve_subproblem_theta,
)
from .harness import (
    RunRecord,
    emit_csv,
    gradcheck,
    parse_csv,
    reproduce_fig2,
    reproduce_fig3,
    run_experiment,
    run_no_ris_baseline,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
