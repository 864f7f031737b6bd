"""Interactive relevance-feedback exploration over compressed multimodal collections."""

from .features import (
    CompressedVector,
    FeatureStats,
    compress,
    compress_collection,
    compute_feature_stats,
    decompress,
    distance,
    dot,
    tfidf,
)
from .index import Cluster, ClusterIndex, create_index, load_index, save_index
from .learner import LinearModel, score, train
from .retrieval import (
    Candidate,
    RetrievalParams,
    RoundStats,
    SuggestionList,
    fuse,
    retrieve,
    score_cluster_set,
)
from .session import Session, create_session, next_round, preseed, submit_feedback
from .storage import Collection, FormatError, ModalityVectors

__version__ = "0.1.0"
