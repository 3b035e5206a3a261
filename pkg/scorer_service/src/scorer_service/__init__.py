"""Scoring microservice: quality scores, embeddings, and perplexity over HTTP."""

__version__ = "0.1.0"
