"""Open quantum random walks: representations, spectra, trajectories, hitting times."""

__version__ = "0.1.0"

from .channel import (
    ChannelMatrix,
    KrausSet,
    adjoint_representation,
    channel_matrix,
    compose,
    matrix_representation,
    site_kraus,
    unvec,
    vec,
)
from .commuting import (
    BirthDeathSpec,
    CommutingPair,
    EigenWeights,
    birth_death,
    diagonalize_pair,
    eigen_weights,
    first_visit_probability,
    gambler_ruin,
    site_probability,
)
from .ergodicity import (
    ChainSpec,
    ErgodicityDecision,
    PowerIterationResult,
    SingularSpectrum,
    WeakErgodicityResult,
    column_distance,
    column_equalization_gap,
    column_gram_spectrum_residual,
    dobrushin_coefficient,
    invariant_state,
    is_ergodic,
    singular_values,
    weak_ergodicity_check,
)
from .errors import (
    ColumnNotNormalized,
    DeadEnd,
    DimensionMismatch,
    Divergent,
    NotASupersolution,
    NotCommuting,
    NotConverged,
    NotNormal,
    NotNormalized,
    NotStochastic,
    NotUnital,
    NumericalFailure,
    OQWalkError,
    ParseError,
    SeriesUndetermined,
    ShapeMismatch,
    StartNotOrigin,
    ValidationError,
    WindowOverflow,
)
from .hitting import (
    AutoWindowResult,
    HittingOperators,
    MeanHittingOperators,
    auto_window_solve,
    evaluate,
    hitting_probabilities,
    mean_hitting_times,
)
from .model_io import dump_model, parse_model
from .potential import (
    CostSpec,
    PotentialOperators,
    SupersolutionReport,
    UniquenessReport,
    check_supersolution,
    solve_potential,
    uniqueness_report,
)
from .qtm import QTM, VectorState, apply, embed_classical, validate_qtm
from .trajectory import (
    FirstVisitHistogram,
    LatticeWindow,
    MonitoredResult,
    TrajectoryState,
    WalkView,
    monitored_evolution,
    run_trajectories,
    step,
    walk_view,
)
