"""Federation of heterogeneous star and snowflake data warehouses.

Component schemas are merged into one logical schema through an ontology of
synonym and parent-of relations; federated queries are split into
per-component sub-queries whose results are merged back together.
"""

from .executor import (
    ResultTable,
    execute_federated,
    execute_global_oracle,
    execute_subquery,
    load_tables,
    merge_results,
)
from .integrator import (
    FederationCatalog,
    Location,
    build_federation,
    integrate_component,
    integrate_dimension_into,
    integrate_measures,
    mapping_report,
)
from .ontology import (
    OntologyRepository,
    build_repository,
    load_repository,
    parse_ontology,
    parse_overrides,
)
from .query_planner import explain, parse_query, plan
from .schema_model import classify, load_component, parse_component, topological_dimensions

__version__ = "0.1.0"

__all__ = [
    "FederationCatalog",
    "Location",
    "OntologyRepository",
    "ResultTable",
    "build_federation",
    "build_repository",
    "classify",
    "execute_federated",
    "execute_global_oracle",
    "execute_subquery",
    "explain",
    "integrate_component",
    "integrate_dimension_into",
    "integrate_measures",
    "load_component",
    "load_repository",
    "load_tables",
    "mapping_report",
    "merge_results",
    "parse_component",
    "parse_ontology",
    "parse_overrides",
    "parse_query",
    "plan",
    "topological_dimensions",
]
