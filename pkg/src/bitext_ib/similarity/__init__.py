from .data import (
    EmbeddingSet,
    InputError,
    PileSortDataset,
    SimilarityMatrix,
    empirical_similarity,
    parse_embeddings,
    parse_pile_sort,
    read_embeddings,
    read_pile_sort,
)
from .evaluation import (
    ConfigurationError,
    CosineFamily,
    CVResult,
    LowRankFamily,
    RidgeFamily,
    UndefinedCorrelationError,
    nested_cv,
    spearman_rho,
)
from .geometry import classical_mds, select_representatives
from .models import (
    DivergenceError,
    LowRankModel,
    RidgeModel,
    UndefinedPairError,
    cosine_baseline,
    predict_similarity,
    ridge_baseline,
    train_low_rank,
)
