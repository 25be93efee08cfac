"""Deterministic chronic-kidney-disease detection pipeline.

Tabular ingest, nature-inspired outlier adjustment and feature selection,
four classifiers (one of them an oblivious-tree gradient booster), an
evaluation suite and exact tree Shapley explanations.
"""

__version__ = "0.1.0"
