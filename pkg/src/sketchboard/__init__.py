"""sketchboard: storyboard dataset construction, shot generation
orchestration, and video evaluation metrics."""

from .frames import (
    DecoderConfig,
    Frame,
    FrameError,
    FrameSequence,
    GrayImage,
    load_frames,
    resize_to_width,
    to_grayscale,
)
from .shotdetect import (
    BoundaryTrace,
    Shot,
    ShotDetectConfig,
    content_difference,
    detect_shots,
    select_keyframes,
)
from .sketch import (
    EdgeMap,
    SketchConfig,
    canny_edges,
    color_dodge,
    erode3x3,
    invert,
    sketchify,
    sketchify_stages,
)
from .prompts import (
    AppearancePrompt,
    ConversionPrompt,
    MotionPrompt,
    RecognitionResult,
    SanitizePolicy,
    StageAsset,
    StructuredDynamicPrompt,
    compose_prompts,
    decompose_stages,
    enhance_story,
    sanitize,
)
from .dataset import (
    DatasetManifest,
    DatasetStats,
    Triplet,
    TripletId,
    assemble_manifest,
    compute_stats,
    validate_triplet,
)
from .metrics import (
    EmbeddingVector,
    EvalConfig,
    EventMatchResult,
    EventSpec,
    MetricReport,
    MetricWeights,
    cosine_sim,
    dynamic_progression,
    edge_f1,
    evaluate_shot,
    event_scores,
    match_events,
    sample_frames,
    temporal_clip,
    temporal_lpips,
    text_image_align,
)
from .providers import (
    ColoringConfig,
    DerivativeConfig,
    ProviderSet,
    StageConfig,
    VideoConfig,
    load_provider_set,
)
from .pipeline import (
    JobGraph,
    LongVideo,
    PipelineError,
    ShotVideo,
    StoryboardShot,
    export_video,
    plan_shot,
    run_shot,
    run_storyboard,
)

__version__ = "0.1.0"
