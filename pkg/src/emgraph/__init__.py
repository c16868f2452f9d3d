"""Error-bounded monotonic proximity graphs for approximate NN search."""

from .bench import (BenchmarkRow, brute_force_knn, brute_force_knn_batch,
                    recall, relative_distance_error, run_benchmark)
from .build_approx import (BuildParams, adaptive_delta, align_degree,
                           bootstrap_graph, build_approx,
                           locally_select_neighbors)
from .build_exact import audit_exact_graph, build_exact, select_neighbors_exact
from .data import (Dataset, FormatError, GroundTruth, dedup, gen_synthetic,
                   read_fvecs, read_ivecs, write_fvecs, write_ivecs)
from .geometry import (distance, in_delta_neighborhood, is_occluded,
                       occlusion_mask, sq_distance)
from .graph import (SENTINEL, BuildMeta, ProximityGraph, add_reverse_edges,
                    degree_stats, medoid, reachable_set, repair_connectivity)
from .quantize import (EncodedVector, NeighborBlock, PreparedQuery,
                       QuantizationModel, QuantizedIndex, build_quantized,
                       encode, estimate_block, estimate_sq_distance,
                       prepare_query, train)
from .search import (CandidateList, SearchReport, error_bounded_search,
                     greedy_search, monotonic_top1)
from .search_quantized import need_probing, probing_search
from .storage import load_index, save_index

__version__ = "0.1.0"
