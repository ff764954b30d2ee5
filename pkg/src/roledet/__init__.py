"""Cyberbullying role detection: data prep, oversampling, classifiers, selective evaluation."""

__version__ = "0.1.0"
