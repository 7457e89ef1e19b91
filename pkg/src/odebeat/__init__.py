"""Second-order ODE modeling of sampled beat waveforms.

Fits x'' + w1 x' + w0 x = 0 (constant or time-varying coefficients) to noisy
curves by iterated principal differential analysis, analyzes stability and
transient response of the fitted system, and classifies beats from
ODE-derived features.
"""

from .basis import (BasisSystem, QuadratureRule, design_matrix, eval_basis,
                    make_basis, make_quadrature)
from .classify import (Metrics, MlpModel, SvmModel, evaluate, kfold_cv,
                       mlp_predict, mlp_train, stratified_folds, svm_predict,
                       svm_train)
from .dynamics import (ResponseCurve, StabilityReport, characteristic_roots,
                       free_response, impulse_response, solve_trajectory,
                       stability, step_response)
from .errors import (DegenerateDataError, InvalidArgumentError, OdebeatError,
                     OutOfDomainError, RankDeficiencyError,
                     UnsupportedPoleError)
from .features import (FeatureVector, FpcaModel, StandardizationTransform,
                       constant_features, fourier_features, fpca_fit,
                       fpca_fit_grid, fpca_scores, standardize_apply,
                       standardize_fit, varying_features)
from .pda import (CoefficientSet, OdeModel, PenaltyMatrix,
                  estimate_coefficients, estimate_parameters, fit,
                  penalty_matrix, select_lambda)
from .signal import (BeatRecord, ContinuousRecording, Morphology, bandpass,
                     make_beat, morphology, segment_beats, synth_beat,
                     synth_dataset)

__version__ = "0.1.0"
