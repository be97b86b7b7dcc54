"""Two-step learned sparse retrieval.

A pruned, saturation-re-weighted approximate search over an impact index
produces candidates that are rescored exactly with the full sparse
vectors. Includes the exhaustive, MaxScore, WAND and Block-Max WAND
query processors, static pruning, index persistence, effectiveness
metrics and a latency harness.
"""
__version__ = "0.1.0"

from twostep._backend import BACKEND
from twostep.corpus import (Collection, CollectionStats, Lexicon, Qrels, SparseVector,
                            compute_stats, load_qrels, load_vectors)
from twostep.errors import (ChecksumError, DocidOutOfRangeError, IndexFormatError,
                            IngestionError, ParseError, QueryMismatchError, TruncatedFileError,
                            TwoStepError, VersionMismatchError)
from twostep.index import ForwardIndex, InvertedIndex, build_forward, build_inverted
from twostep.pipeline import TwoStepConfig, gt_search, two_step_search
from twostep.pruning import PruneConfig, Strategy, lexical_prune, prune_collection, prune_vector_topk
from twostep.retrieval import (Algorithm, ScoredList, SearchParams, search, search_bmw,
                               search_exhaustive, search_filtered, search_maxscore, search_wand)
from twostep.scoring import INFINITY, Bm25, Dot, Saturated, score_bm25, score_dot, score_saturated
from twostep.storage import index_size_report, load_forward, load_index, save_index

__all__ = [
    "BACKEND", "Collection", "CollectionStats", "Lexicon", "Qrels", "SparseVector",
    "compute_stats", "load_qrels", "load_vectors", "ChecksumError", "DocidOutOfRangeError",
    "IndexFormatError", "IngestionError", "ParseError", "QueryMismatchError",
    "TruncatedFileError", "TwoStepError", "VersionMismatchError", "ForwardIndex",
    "InvertedIndex", "build_forward", "build_inverted", "TwoStepConfig", "gt_search",
    "two_step_search", "PruneConfig", "Strategy", "lexical_prune", "prune_collection",
    "prune_vector_topk", "Algorithm", "ScoredList", "SearchParams", "search", "search_bmw",
    "search_exhaustive", "search_filtered", "search_maxscore", "search_wand", "INFINITY",
    "Bm25", "Dot", "Saturated", "score_bm25", "score_dot", "score_saturated",
    "index_size_report", "load_forward", "load_index", "save_index",
]
