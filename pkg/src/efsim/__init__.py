"""efsim: deterministic multi-client simulator for error-feedback
distributed optimization under communication compression.

The package is organized around seven building blocks:

- :mod:`efsim.compressors` -- TopK / natural / identity operators and the
  contraction-parameter algebra (theta, beta, xi);
- :mod:`efsim.objectives` -- client losses, gradient oracles, smoothness
  constants, sparsity patterns;
- :mod:`efsim.weighting` -- smoothness summaries, proportional weights,
  client cloning, the rare-features sparsity parameter;
- :mod:`efsim.stepsizes` -- every variant's maximal theoretical step size;
- :mod:`efsim.algorithms` -- the error-feedback round transitions;
- :mod:`efsim.datagen` -- synthetic problems, LIBSVM parsing, shuffling;
- :mod:`efsim.harness` -- run configs, the round loop, metrics, CSV/SVG.
"""

from .algorithms import (
    DistortionReport,
    OutputLaw,
    RunState,
    build_cloned_problem,
    distortion,
    geometric_output_law,
    init_state,
    select_output,
    step_ef21,
    step_ef21_pp,
    step_ef21_w,
    step_ef21_w_sgd,
)
from .compressors import (
    CompressorSpec,
    ContractionParams,
    GeneralizedYoung,
    apply,
    contraction_functions,
    generalized_young,
    natural_compress,
    optimal_young_s,
    top_k,
)
from .datagen import (
    ShuffleAssignment,
    SynthConfig,
    generate_synthetic,
    parse_libsvm,
    shuffle_heuristic,
)
from .errors import (
    ConfigError,
    DomainError,
    EfsimError,
    LibsvmParseError,
    PowerIterationError,
    TheoryCheckError,
)
from .harness import (
    LibsvmSource,
    MetricsRow,
    RunConfig,
    RunSummary,
    bits_per_round,
    compare,
    emit_csv,
    emit_svg,
    execute,
)
from .objectives import (
    ClientProblem,
    Dataset,
    GlobalProblem,
    SparsityPattern,
    StochasticEstimatorSpec,
    global_smoothness,
    gradient,
    make_global_problem,
    smoothness_constant,
    sparsity_pattern,
    stochastic_gradient,
    value,
)
from .stepsizes import (
    AbcAggregates,
    PpParams,
    SgdParams,
    abc_aggregates,
    gamma_clone,
    gamma_ef21_classic,
    gamma_ef21_w,
    gamma_pl,
    gamma_pl_cloned,
    gamma_pp,
    gamma_rare,
    gamma_sgd,
    pp_params,
    sgd_params,
    tune_pp_params,
    tune_sgd_params,
)
from .weighting import (
    CloneCounts,
    SmoothnessSummary,
    WeightVector,
    clone_counts,
    clone_objective,
    optimal_weights,
    rare_feature_c,
    smoothness_weights,
    summarize,
    uniform_weights,
)

__version__ = "0.1.0"
