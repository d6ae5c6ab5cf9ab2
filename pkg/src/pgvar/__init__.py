"""Product-graph vector autoregressive forecasting of multi-dimensional graph processes."""

from ._backend import BACKEND
from .estimation import (
    AutocorrelationSet,
    FitConfig,
    FitReport,
    build_regression,
    empirical_autocorrelation,
    fit,
    grid_search,
    least_squares_fit,
    mse_closed_form,
)
from .filtering import (
    apply_poly_filter,
    apply_product_filter,
    apply_product_shift_filter,
    apply_shift,
    count_multiply_adds,
)
from .graph import (
    Graph,
    ProductShiftOperator,
    build_knn_graph,
    make_product,
    normalize_shift,
    product_edge_count,
)
from .metrics import EvalReport, rnmse
from .models import ModelParams, predict_one_step, reduce_model, rollout
from .signal import (
    PreprocessTransform,
    SignalSequence,
    load_sequence,
    preprocess,
    reshape_to_matrix,
    save_sequence,
    split_series,
)

__version__ = "0.1.0"
