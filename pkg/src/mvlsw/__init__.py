"""Multivariate locally stationary wavelet processes with cross-scale dependence."""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    DomainError,
    ParameterError,
    ParseError,
    SingularOperatorError,
    SpecificationError,
)
from .wavelets import (
    AutocorrTable,
    DiscreteWaveletSet,
    InnerProductOperator,
    QuadratureMirrorPair,
    autocorrelation_wavelets,
    build_daubechies_filter,
    discrete_wavelets,
    inner_product_operator,
    inverse_operator,
    invert_inner_product,
    mra_decompose,
    nondecimated_transform,
    parse_wavelet,
)
from .surfaces import CoherenceSurface, CrossScaleSpectrum, MultichannelSeries, Pair, parse_pairs
from .process import (
    Ar2LatentSpec,
    MvLswSpec,
    PiecewiseConstant,
    Realization,
    derive_seed,
    load_spec,
    mix_timevarying,
    save_spec,
    simulate_ar2,
    simulate_batch,
    simulate_design,
    simulate_mvlsw,
    spec_from_dict,
    spec_to_dict,
    true_coherence,
    true_cross_spectrum,
)
from .estimation import (
    bias_correct,
    coherence_estimate,
    covariance_from_spectrum,
    empirical_coefficients,
    estimate_spectrum,
    partial_windowed_coherence,
    raw_cross_periodogram,
    smooth_periodogram,
    windowed_coherence,
)
from .inference import (
    NullDistribution,
    PermutationResult,
    median_curve,
    null_distribution,
    permutation_test,
    significance_mask,
)
from .io import AnalysisConfig, ResultTable, load_csv, log_return, scale_to_band, write_series_csv
