"""Simulator for an incentivized model-sharing market over personalized federated learning."""

__version__ = "0.1.0"
