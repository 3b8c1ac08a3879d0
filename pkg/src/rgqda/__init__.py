"""Generalized quadratic discriminant analysis with robust estimators."""

from .classifier import (
    GqdaModel,
    PairStatistic,
    classify,
    delta_sq,
    fit_gqda,
    margins,
    misclassification_error,
    model_from_json,
    model_to_json,
    predict,
    predict_indices,
    select_c_multiclass,
    select_c_on_test,
    select_c_two_class,
    sigma_d,
)
from .data_io import (
    LabeledDataset,
    flip_labels,
    load_csv,
    run_real_experiment,
    save_csv,
    stratified_split,
)
from .errors import (
    ClassTooSmall,
    ConfigError,
    DegenerateData,
    DimensionMismatch,
    EmptyDataset,
    MissingColumn,
    NotPositiveDefinite,
    ParseError,
    RgqdaError,
    TooFewObservations,
    UnsupportedDesign,
)
from .estimators import (
    EstimatorSpec,
    LocationScatter,
    fit,
    fit_classical,
    fit_m_huber,
    fit_mcd,
    fit_mve,
    fit_s_tukey,
    fit_sd,
    fit_winsorized,
)
from .linalg import SpdMatrix, cholesky, mahalanobis_sq, mahalanobis_sq_many
from .simulate import (
    ContaminationSpec,
    DistributionSpec,
    ExperimentConfig,
    Report,
    ReportRow,
    config_from_json,
    contaminate,
    make_contamination,
    report_from_csv,
    run_experiment,
    sample,
    write_report_csv,
    write_summary_json,
)

__version__ = "0.1.0"
