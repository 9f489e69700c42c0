"""Unsupervised grouping of human actions with per-person nonnegative dictionaries."""
