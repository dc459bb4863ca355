"""Deep contrastive graph learning toolkit for clustering vector data.

Learns an affinity graph jointly with contrastively trained representations
(a GCN branch over an adaptively rebuilt neighbor graph, an auto-encoder
branch over raw features, and a diffusion-smoothed global view) and reads
cluster labels out with normalized-cut spectral clustering.
"""

from .clustering import ClusterAssignment, cluster_embeddings, kmeans, ncut_spectral
from .data_io import DataMatrix, RunConfig, l2_normalize, load_dataset, make_blobs
from .diffusion import build_global_graph, merge_representations, ppr_diffusion
from .errors import ConfigError, DataError, NumericalError
from .evaluation import MetricReport, accuracy, metric_report, nmi
from .graph import (
    AffinityGraph,
    GraphRole,
    NormalizedGraph,
    build_graph,
    neighbor_schedule,
    normalize_graph,
    pairwise_sq_dists,
    solve_row_weights,
)
from .losses import (
    CentroidSet,
    LossBundle,
    cosine_sim,
    loss_ae,
    loss_cluster_contrastive,
    loss_feature_contrastive,
    loss_graph,
    total_loss,
)
from .networks import (
    AutoencoderParams,
    GcnParams,
    ModelParams,
    forward_attribute,
    forward_cluster_indicators,
    forward_structural,
    gcn_layer,
    init_params,
)
from .trainer import RunResult, TrainState, adam_step, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"
