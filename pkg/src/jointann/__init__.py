"""Filtered approximate nearest neighbor search over joint attribute-vector
proximity graphs, with baselines, synthetic workloads, and a benchmark CLI."""

from .attrs import (
    AttrDistanceConfig,
    Attribute,
    AttributeSet,
    BoolPredicateFilter,
    EqualityFilter,
    Family,
    Filter,
    Point,
    RangeFilter,
    SubsetFilter,
    UnifiedDistance,
    attribute_distance,
    capped_attribute_distance,
    compare_build,
    compare_query,
    filter_distance,
    matches,
    weighted_build_distance,
)
from .baselines import (
    brute_force_ground_truth,
    matching_mask,
    post_filter_search,
    pre_filter_search,
    selectivity,
)
from .bench import EvalReport, recall_at_k, run_ablation_grid, run_experiment
from .errors import (
    DatasetFormatError,
    DegenerateAttributeSample,
    DimensionMismatch,
    EmptyIndex,
    FilterFamilyMismatch,
    IndexFormatError,
    JointAnnError,
    UnsatisfiableFilter,
)
from .graph import (
    QUANTILE_LEVELS,
    WEIGHT_MULTIPLIERS,
    BuildParams,
    JointGraph,
    derive_thresholds,
    derive_weights,
    nearest_rank_quantile,
)
from .metric import DcCounter, sq_l2
from .search import (
    SearchParams,
    SearchResult,
    ThresholdComparator,
    VectorComparator,
    WeightComparator,
    greedy_search,
    query,
)

__version__ = "0.1.0"
