"""Data-driven battery capacity analysis and prediction.

Voltage-segment feature extraction from constant-current charging curves,
correlation and exact Shapley attribution, t-SNE feature fusion with KL
screening, and a whale-optimized extreme learning machine benchmarked
against KNN / tree / forest / GBRT baselines.
"""

__version__ = "0.1.0"
