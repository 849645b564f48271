"""Hybrid continuous-variable and qubit LS-SVM classifiers, simulated classically."""

__version__ = "0.1.0"
