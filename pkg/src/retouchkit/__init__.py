"""retouchkit: staged photo retouching with verifiable edit plans.

The toolkit models retouching as three ordered stages of integer-valued
adjustments (tonal balance, global color, per-band color), generates
seeded training puzzles from expert images, talks to a vision oracle
through swappable transports, and scores outputs with reference
metrics.
"""

from .errors import (
    EXIT_IO,
    EXIT_OK,
    EXIT_SERVICE,
    EXIT_VALIDATION,
    RetouchError,
    ServiceError,
    StreamError,
    ValidationError,
    exit_code_for,
)
from .imagecore import (
    ColorSpace,
    ImageBuffer,
    PixelStats,
    compute_stats,
    decode,
    encode,
    load_image,
    save_image,
    to_encoded,
    to_linear,
)
from .metrics import (
    HistScores,
    MetricReport,
    compare,
    hist_intersection,
    psnr_db,
    reduce_best,
    ssim,
)
from .ops import (
    APPROXIMATE,
    EXACT,
    REGISTRY,
    Adjustment,
    OpDescriptor,
    apply,
    apply_sequence,
    canonical_order,
    get_op,
    invert,
    list_ops,
    stage_of,
    verify_invertibility,
)
from .oracle import (
    CachingClient,
    CompletionRequest,
    CompletionResult,
    HttpClient,
    OracleClient,
    ReplayClient,
    StubClient,
    make_client,
    plan_stage,
    resolve_values,
    synthesize_reasoning,
)
from .pipeline import PipelineState, resume_run, start_run
from .plan import (
    DEFAULT_LEGEND,
    Legend,
    Plan,
    ReasoningTriplet,
    StagePlan,
    parse_plan,
    plan_to_dict,
    resolve_legend,
    serialize_plan,
)
from .puzzles import (
    DESK_SCALE,
    PerturbationPolicy,
    PuzzleRecord,
    generate_dataset,
    read_records,
    stitch,
    write_records,
)

__version__ = "0.1.0"

__all__ = [
    "APPROXIMATE",
    "Adjustment",
    "CachingClient",
    "ColorSpace",
    "CompletionRequest",
    "CompletionResult",
    "DEFAULT_LEGEND",
    "DESK_SCALE",
    "EXACT",
    "EXIT_IO",
    "EXIT_OK",
    "EXIT_SERVICE",
    "EXIT_VALIDATION",
    "HistScores",
    "HttpClient",
    "ImageBuffer",
    "Legend",
    "MetricReport",
    "OpDescriptor",
    "OracleClient",
    "PerturbationPolicy",
    "PipelineState",
    "PixelStats",
    "Plan",
    "PuzzleRecord",
    "REGISTRY",
    "ReasoningTriplet",
    "ReplayClient",
    "RetouchError",
    "ServiceError",
    "StagePlan",
    "StreamError",
    "StubClient",
    "ValidationError",
    "apply",
    "apply_sequence",
    "canonical_order",
    "compare",
    "compute_stats",
    "decode",
    "encode",
    "exit_code_for",
    "generate_dataset",
    "get_op",
    "hist_intersection",
    "invert",
    "list_ops",
    "load_image",
    "make_client",
    "parse_plan",
    "plan_stage",
    "plan_to_dict",
    "psnr_db",
    "read_records",
    "reduce_best",
    "resolve_legend",
    "resolve_values",
    "resume_run",
    "save_image",
    "serialize_plan",
    "ssim",
    "stage_of",
    "start_run",
    "stitch",
    "synthesize_reasoning",
    "to_encoded",
    "to_linear",
    "verify_invertibility",
    "write_records",
]
