"""Data-level hybrid rebalancing of imbalanced tabular data."""
