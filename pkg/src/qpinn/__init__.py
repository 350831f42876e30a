"""Tensor-decomposed QSP circuits and quantum-inspired PINNs for the
Merton portfolio HJB equation."""

from . import circuits, duals, merton, models, qsp, sim, training, verify

__version__ = "0.1.0"
