"""Cover-song style similarity networks: community detection, re-ranking and prototype search."""
from .datasets import Collection, GeneratorParams, SetupSpec, generate_collection, sample_setup, setup
from .errors import FormatError, InvalidInputError
from .evaluation import EvalReport, evaluate, map_score, per_song_f, refine_matrix
from .graph import DissimilarityMatrix, Network, SimilarityInput, from_qmax, symmetrize, threshold_graph
from .partition import Partition

__version__ = "0.1.0"
