"""Cluster-information transfer for GCNs under structure shift.

Thin wrapper over the C++ core; see README.md for the experiment workflow.
"""

from ._cit import (
    CitConfig,
    Error,
    FisherWorld,
    Graph,
    NumericalError,
    ParseError,
    ShapeError,
    TrainResult,
    ValidationError,
    __version__,
    accuracy,
    cluster_stats,
    consistent_world,
    fisher_stats,
    gradient_suite,
    graph_from_arrays,
    load_graph,
    macro_f1,
    mincut_loss,
    ortho_loss,
    paired_t_test,
    perturb_add_edges,
    perturb_delete_edges,
    preset_config,
    random_world,
    resolve_spec,
    roc_auc,
    run_experiment,
    sbm_graph,
    silhouette,
    split_nodes,
    t_critical,
    theory_transfer_check,
    train,
    transfer,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
