"""Rank-based inference on tail dependence: empirical stable tail dependence
functions, multiplier bootstrap, parametric minimum-distance fits, an
extremal-isotropy test for gridded fields, and exact max-stable simulators."""

__version__ = "0.1.0"

from .errors import (BandwidthError, InputError, ModeError, ModelError, NumericError, SizeError,  # noqa: E402
                     TailDepError)
from .ranks import RankedSample, compute_ranks, load_sample, read_matrix, write_matrix  # noqa: E402
from .estimators import (EvaluationRequest, MarginSet, TailStatisticVector, chi_matrix,  # noqa: E402
                         empirical_stdf, empirical_tail_copula, evaluate, extremal_coefficient,
                         linearization_residual, linearized_process, oracle_stdf, preasymptotic_stdf,
                         tail_correlation)
from .models import (BrownResnickField, HuslerReiss, Logistic, PerfectDependence, brown_resnick_chi,  # noqa: E402
                     model_from_config)
from .partials import BandwidthRule, partial_hat  # noqa: E402
from .bootstrap import (BootstrapEnsemble, analytic_bivariate_variance, bootstrap_quantile,  # noqa: E402
                        bootstrap_replicates, influence_table)
from .simulate import FieldGrid, sample_brown_resnick, sample_logistic  # noqa: E402
from .mestimation import Criterion, FitResult, OptimizerConfig, criterion_value, fit, linearization_pieces  # noqa: E402
from .isotropy import combined_p_value, enumerate_pairs, isotropy_test, lag_p_value  # noqa: E402
