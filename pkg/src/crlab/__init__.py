"""Numerical CR geometry: jets, Webster connections, Chern-Moser curvature,
second fundamental forms of CR maps into spheres and Q-frames."""
from .jets import Jet, JetContext, JetError, get_context, implicit_graph_jet, jet_from_polynomial, jet_linear_solve
from .polynomial import PolynomialSpec

__version__ = "0.1.0"

__all__ = ["Jet", "JetContext", "JetError", "PolynomialSpec", "get_context", "implicit_graph_jet",
           "jet_from_polynomial", "jet_linear_solve"]
