"""Packaged applications: maximum bisection, sparse tensor PCA and community
detection, plus instance readers and generators."""

from .community import (
    build_community,
    extract_communities,
    misclassification_rate,
    planted_partition,
    solve_community,
)
from .graphs import (
    FormatError,
    WeightedGraph,
    parse_graph,
    random_graph,
    read_graph,
    read_labels,
    read_tensor,
    write_graph,
    write_labels,
    write_tensor,
)
from .maxbisect import (
    brute_force_bisection,
    build_max_bisection,
    cut_value,
    greedy_balance,
    round_assignment,
    solve_max_bisection,
)
from .mpca import (
    MpcaParams,
    MpcaState,
    generate_mpca_data,
    mpca_metrics,
    mpca_step,
    run_mpca,
)
from .tensor import kron_others, mode_fold, mode_product, mode_unfold, tucker_apply
