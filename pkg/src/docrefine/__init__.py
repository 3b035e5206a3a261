"""Toolkit for document-level translation refinement pipelines.

Prepares document-aligned corpora, orchestrates Sent2Sent and Doc2Doc
translation plus two-candidate refinement against chat-completion
endpoints, builds quality-weighted fine-tuning datasets, and evaluates
outputs with document-level metrics.
"""

__version__ = "0.1.0"
