"""Adversarial imitation learning from per-episode aggregated metrics."""

__version__ = "0.1.0"
