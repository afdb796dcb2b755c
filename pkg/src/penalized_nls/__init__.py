"""Penalized semiclassical nonlinear Schrödinger laboratory."""
