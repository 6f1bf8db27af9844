"""Clustering the categories of multivariate categorical data.

Within-variable merging by minimal loss of average inertia, between-variable
response sets from standardized residuals or weighted resistance, and
bi-dendrogram output.
"""
__version__ = "0.1.0"

from .dataset import (  # noqa: E402
    ContingencyTable,
    Dataset,
    IndicatorMatrix,
    VariableSchema,
    crosstab,
    drop_missing_rows,
    load_dataset,
    merge_columns,
    self_crosstab,
)
from .inertia import (  # noqa: E402
    chi_square_distances,
    correspondence_analysis,
    standardized_residuals,
    table_inertia,
    total_inertia,
)
from .within import (  # noqa: E402
    assemble_bidendrogram,
    enumerate_candidates,
    merge_step,
    variable_clustering,
    within_variable_clustering,
)
from .between import (  # noqa: E402
    assign_observations,
    cluster_of_clusters,
    cluster_profile_table,
    observation_resistance,
    pairwise_weighted_resistance,
    residual_block_matrix,
    residual_linkage_clustering,
    resistance_linkage_clustering,
)
from .dendrogram import BiDendrogram, MergeTree, export_tree, import_tree  # noqa: E402
from .render import RenderOptions, render_bidendrogram  # noqa: E402
