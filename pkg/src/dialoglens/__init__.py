"""Classroom discussion analytics.

From multi-speaker discussion transcripts (and optionally session audio
and acoustic frame features) to per-segment features, group-by-week
aggregates, statistical screening against achievement outcomes, and a
small supervised pipeline that predicts each group's outcome band.
"""

from .corpus import (
    Gender,
    Role,
    Segment,
    SessionDialog,
    SpeakerLabel,
    TokenCount,
    TranscriptError,
    ValidationWarning,
    count_tokens,
    language_proportions,
    load_corpus_dir,
    load_transcript,
    parse_transcript,
    serialize_transcript,
)
from .embedding import (
    EmbeddingTable,
    KeywordSet,
    TrainingConfig,
    average_vector,
    cosine,
    tfidf_keywords,
    tokenize,
    train_cbow,
)
from .semantics import (
    CategoryCounts,
    CategoryLexicon,
    Glossary,
    IdentityTranslator,
    OfflineLexiconTranslator,
    count_categories,
    count_math_terms,
    load_glossary,
    load_lexicon,
    load_translation_lexicon,
    translate_segment,
)
from .acoustics import (
    FrameFeatureSeries,
    NormalizationStats,
    SegmentAcoustics,
    aggregate_segment,
    gender_normalize,
    ingest_frame_features,
    normalize_acoustics,
)
from .audiosync import (
    AudioTrack,
    OffsetEstimate,
    SplitDecision,
    WindowLabel,
    estimate_offset,
    excise_lecture,
    load_wav,
    save_wav,
    similarity_profile,
    threshold_profile,
)
from .features import (
    ExtractionResources,
    RateCategory,
    SegmentFeatures,
    SpeakingRateParams,
    cohesion_score,
    extract_segment_features,
    speaking_rate,
    topic_relevance_score,
)
from .grouping import (
    AGGREGATIONS,
    GroupFeatureTable,
    GroupMarks,
    GroupWeekRow,
    OutcomeLabel,
    aggregate_group,
    label_groups,
    outcome_score,
    rank_groups,
)
from .stats import (
    AnovaResult,
    PearsonResult,
    ScreeningResult,
    anova_oneway,
    anova_two,
    betainc,
    normalize_weekly,
    pearson,
    quartiles,
    screen_features,
)
from .predict import (
    Dataset,
    EvaluationResult,
    HyperParams,
    Imputation,
    RandomProjection,
    TrainedModel,
    accuracy,
    confusion_matrix,
    dataset_from_table,
    default_search,
    derive_seed,
    evaluate_model,
    nested_cv,
    stratified_folds,
    train_model,
)
from .synth import Plant, SyntheticSpec, generate_corpus, generate_session_tracks
from .pipeline import PipelineConfig, PipelineError, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # corpus
    "Gender",
    "Role",
    "Segment",
    "SessionDialog",
    "SpeakerLabel",
    "TokenCount",
    "TranscriptError",
    "ValidationWarning",
    "count_tokens",
    "language_proportions",
    "load_corpus_dir",
    "load_transcript",
    "parse_transcript",
    "serialize_transcript",
    # embedding
    "EmbeddingTable",
    "KeywordSet",
    "TrainingConfig",
    "average_vector",
    "cosine",
    "tfidf_keywords",
    "tokenize",
    "train_cbow",
    # semantics
    "CategoryCounts",
    "CategoryLexicon",
    "Glossary",
    "IdentityTranslator",
    "OfflineLexiconTranslator",
    "count_categories",
    "count_math_terms",
    "load_glossary",
    "load_lexicon",
    "load_translation_lexicon",
    "translate_segment",
    # acoustics
    "FrameFeatureSeries",
    "NormalizationStats",
    "SegmentAcoustics",
    "aggregate_segment",
    "gender_normalize",
    "ingest_frame_features",
    "normalize_acoustics",
    # audiosync
    "AudioTrack",
    "OffsetEstimate",
    "SplitDecision",
    "WindowLabel",
    "estimate_offset",
    "excise_lecture",
    "load_wav",
    "save_wav",
    "similarity_profile",
    "threshold_profile",
    # features
    "ExtractionResources",
    "RateCategory",
    "SegmentFeatures",
    "SpeakingRateParams",
    "cohesion_score",
    "extract_segment_features",
    "speaking_rate",
    "topic_relevance_score",
    # grouping
    "AGGREGATIONS",
    "GroupFeatureTable",
    "GroupMarks",
    "GroupWeekRow",
    "OutcomeLabel",
    "aggregate_group",
    "label_groups",
    "outcome_score",
    "rank_groups",
    # stats
    "AnovaResult",
    "PearsonResult",
    "ScreeningResult",
    "anova_oneway",
    "anova_two",
    "betainc",
    "normalize_weekly",
    "pearson",
    "quartiles",
    "screen_features",
    # predict
    "Dataset",
    "EvaluationResult",
    "HyperParams",
    "Imputation",
    "RandomProjection",
    "TrainedModel",
    "accuracy",
    "confusion_matrix",
    "dataset_from_table",
    "default_search",
    "derive_seed",
    "evaluate_model",
    "nested_cv",
    "stratified_folds",
    "train_model",
    # synth
    "Plant",
    "SyntheticSpec",
    "generate_corpus",
    "generate_session_tracks",
    # pipeline
    "PipelineConfig",
    "PipelineError",
    "run_pipeline",
]
