"""In-parameter-linear neural architectures with incremental gradient learners
and online BIBS / ISS stability monitoring."""

from .architectures import (
    CustomBasisMap,
    FunctionalLinkMap,
    IplnaModel,
    PolynomialMap,
    features,
    parse_arch,
    predict,
)
from .errors import ConfigError, DataError, DivergenceError, DomainError, UsageError
from .harness import ExperimentConfig, RunSummary, SyntheticSpec, generate, ingest_csv, parse_synth, run_experiment
from .learners import (
    AdamState,
    GdState,
    NgdState,
    RlsState,
    SampleStep,
    StateSpaceStep,
    adam_step,
    batch_gd_step,
    gd_step,
    learner_step,
    ngd_step,
    parse_learner,
    rls_step,
)
from .monitor import IssBound, Monitor, MonitorConfig, StabilityReport, bibs_bound, iss_bounds, window_condition

__version__ = "0.1.0"
