"""tesserflow: an embeddable spatiotemporal query engine.

Datasets are ingested into a sharded, column-first storage format with
inverted, range, location, and area indices over an ordered key-value
table.  Queries are written in a small functional pipeline language and
run either ad hoc (parallel, fail-fast) or as checkpointed, resumable
batch jobs.
"""

from tesserflow.errors import TesserflowError

__version__ = "0.1.0"

__all__ = ["TesserflowError", "__version__"]
