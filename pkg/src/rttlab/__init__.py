"""Cloud access-time (RTT) modeling toolkit.

Builds RTT prediction models with stacked LSTMs trained from scratch,
transfers them to new environments by DTW-based source selection and
layer-freezing fine-tuning, generates synthetic traces autoregressively,
and replays traces through a time-driven delay simulator with accuracy
reporting.
"""

from .dtw import DtwResult, dtw
from .emulation import (
    DelayProfile,
    EmulationReport,
    PingSchedule,
    evaluate_accuracy,
    run_emulation,
)
from .errors import (
    DegenerateInputError,
    EmptyInputError,
    GenerationDivergedError,
    ModelFormatError,
    NumericError,
    RttlabError,
    TraceParseError,
    TraceValidationError,
)
from .generate import GenerationSpec, generate
from .library import LibraryEntry, ModelLibrary, SelectionResult, select_source
from .lstm import (
    ForwardTape,
    LstmArchitecture,
    LstmState,
    ModelWeights,
    backward,
    forward,
    init_weights,
    lstm_cell_forward,
    mse_loss,
    probact_elu,
)
from .metrics import nrmse_percentile, pearson, percentile, smape, smape_improvement
from .model_io import (
    LstmModel,
    ModelMetadata,
    load_model,
    load_model_file,
    save_model,
    save_model_file,
)
from .optim import AdamState, adam_step, clip_by_global_norm
from .trace import (
    RttTrace,
    SplitSpec,
    Standardizer,
    SupervisedSeries,
    destandardize,
    load_trace,
    parse_trace,
    save_trace,
    serialize_trace,
    split,
    standardize,
    to_supervised,
)
from .training import (
    GridSearchResult,
    HyperGrid,
    TrainConfig,
    TrainReport,
    evaluate_weights,
    grid_search,
    predict_series,
    train,
)
from .transfer import (
    FreezeSpec,
    ValidationResult,
    fine_tune,
    out_of_sample_validate,
    train_specialized,
)

__version__ = "0.1.0"
