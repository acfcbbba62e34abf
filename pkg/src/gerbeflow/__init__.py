"""Numerical toolkit for gradient generalized Ricci solitons on flat tori."""
__version__ = "0.1.0"
