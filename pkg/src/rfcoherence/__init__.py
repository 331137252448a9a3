"""Entanglement model of resonance fluorescence: closed forms, Fock-space oracle, Monte Carlo and fits."""

__version__ = "0.1.0"
