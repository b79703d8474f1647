"""seqbeam: MLM-guided protein sequence optimization.

Scores entire 1-edit neighborhoods of seed sequences via approximate
pseudo-log-likelihoods, searches with temperature-annealed stochastic beam
search, optionally guides with black-box multi-objective scalarization, and
evaluates/filters outputs with developability metrics.
"""

from .seqcore import (
    ALPHABET,
    CandidateSequence,
    PositionMask,
    apply_edit,
    hamming,
)
from .provider import CoupledProvider, PssmProvider, RemoteProvider
from .pll import (
    PllScore,
    build_profile,
    exact_pll,
    approx_pll_wt,
    approx_pll_double_mask,
    approx_pll_nomask_child,
    approx_pll_nomask_template,
    expand_neighborhood,
    score_neighborhood,
)
from .samplers import (
    BeamConfig,
    MutationSamplerConfig,
    GenerationRun,
    beam_search,
    gibbs_sample,
    denoise_sample,
    batch_generate,
)
from .guidance import (
    ObjectiveSpec,
    ObjectiveSet,
    orient_and_zscore,
    sts_scalarize,
    nds_rank,
    guided_rank,
    threshold_filter,
)
from .metrics import (
    FrequencyTable,
    PkaSet,
    germline_delta,
    isoelectric_point,
    liability_scan,
    pairwise_diversity,
    region_mutation_count,
)

__version__ = "0.1.0"
