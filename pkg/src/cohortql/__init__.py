"""Natural-language cohort discovery over a local DICOM-metadata catalog.

The package turns a free-text question into an analytic SQL query via a
chat-completion provider, executes it against an immutable in-memory
catalog, feeds execution errors back to the model until the query runs
(bounded retry loop), and materializes successful results as exportable
cohorts.  A benchmark harness scores the whole loop with accuracy, F1,
and edit-distance statistics.
"""

from cohortql.catalog import Catalog, load_catalog, resolve_table, scan_rows
from cohortql.pipeline import PipelineConfig, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "Catalog",
    "PipelineConfig",
    "load_catalog",
    "resolve_table",
    "run_pipeline",
    "scan_rows",
    "__version__",
]
