"""connframe: connotation-frame induction for verb predicates.

A connotation frame assigns a polarity (-, =, +) to each of nine typed
relations a verb implies between the writer, the agent, and the theme.
This package learns per-aspect log-linear classifiers over word
embeddings, couples them with a tree-structured factor graph trained by
piecewise likelihood, and ships baselines, annotation aggregation,
evaluation metrics, and corpus-level analysis over SVO tuple dumps.
"""

from .core import (
    ASPECTS,
    POLARITIES,
    Aspect,
    ConnotationFrame,
    Polarity,
    ResponseScale,
    parse_aspect,
    parse_polarity,
    polarity_from_score,
    read_lexicon,
    validate_frame,
    write_lexicon,
)
from .embeddings import EmbeddingTable, cosine, load_embeddings, nearest_neighbors
from .errors import (
    ConnframeError,
    DataError,
    FormatError,
    GraphStructureError,
    VocabularyError,
)
from .aspect_model import (
    AspectClassifier,
    featurize,
    load_models,
    predict_label,
    predict_probs,
    save_models,
    train_all_aspects,
    train_aspect,
)
from .factor_graph import (
    Factor,
    FactorGraph,
    MarginalSet,
    Variable,
    enumerate_marginals,
    loopy_sum_product,
    max_marginal_decode,
    sum_product_tree,
)
from .frame_model import (
    FrameModel,
    FrameWeights,
    build_frame_graph,
    generate_synthetic,
    predict_frame,
    read_weights,
    train_piecewise,
    write_weights,
)
from .baselines import GraphPropBaseline, KnnBaseline, MajorityBaseline, graph_prop, knn_predict
from .annotations import (
    AggregatedLabel,
    AnnotationRecord,
    aggregate,
    aggregate_frames,
    krippendorff_alpha,
    nc_agreement,
    read_annotations,
    response_to_score,
    strict_agreement,
)
from .evaluation import EvalReport, accuracy, evaluate, macro_f1, split
from .corpus import (
    EntitySentimentRow,
    Leaning,
    SVOTuple,
    entity_pair_score,
    entity_pair_scores,
    leaning_contrast,
    load_tuples,
    subjectivity_composition,
)

__version__ = "0.1.0"
