"""Penalized fourth-order approximation of convexity-constrained minimizers
on an interval, with an independent direct minimizer and estimate checks."""

__version__ = "0.1.0"
