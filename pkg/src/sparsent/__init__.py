"""Incremental, interactive annotation engine for sparse entity extraction.

Bootstraps a base sequence model via entity set expansion, samples the
most informative sentences with pool-based active learning, accelerates
labeling with thresholded auto-annotation, and reports an online
confidence score usable as a stopping criterion without gold data.
"""

__version__ = "0.1.0"
