"""Graph domain adaptation with matched local projections.

Label functions on a source and a target graph are estimated jointly by
asking their spectral graph wavelet coefficients to agree at a few matched
node pairs, with Laplacian smoothing in each graph.
"""

__version__ = "0.1.0"

from .errors import (
    GralpError,
    InvalidModeError,
    InvalidParameterError,
    NumericFailureError,
    SingularSystemError,
    UndefinedMeasureError,
)
from .graph import FeatureSet, Graph, Laplacian, build_knn_graph, laplacian
from .spectral import SpectralDecomposition, decompose, filter_signal, fourier, inverse_fourier
from .wavelets import (
    KernelSpec,
    MatchedDictionary,
    WaveletFrame,
    build_matched_dictionary,
    kernel_eval,
    sample_scales,
    scaling_atom,
    wavelet_atom,
)
from .solver import (
    AdaptationProblem,
    LabelFunction,
    Solution,
    decode_labels,
    encode_labels,
    evaluate_objective,
    objective_gradient,
    solve,
)
from .experiments import (
    SweepData,
    SweepSpec,
    balanced_error,
    coefficient_dissimilarity,
    misclassification_rate,
    run_sweep,
)
from .pipeline import Domain, adapt, domain_from_features, prepare_domain
from .synthetic import SyntheticPairConfig, generate_synthetic_pair
