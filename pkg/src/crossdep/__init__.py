"""Estimation of statistical dependence between two random processes.

Two multilayer perceptrons are trained with a log-determinant correlation
objective; the spectrum of the learned cross-correlation operator recovers
the eigenvalues and eigenfunctions of the cross-density kernel, and the
cross-density ratio assembled from them quantifies dependence.
"""

__version__ = "0.1.0"
