"""Coupled-oscillator community detection via regime-split path signatures.

Submodules:

* ``graphs`` -- random coupling graphs with planted communities.
* ``dynamics`` -- full, stochastic, mean-field, and Gaussian reduced models.
* ``signatures`` -- path signatures, lead and covariance matrices.
* ``clustering`` -- block-structure scores and community estimation.
* ``spikes`` -- spike-train ingestion into multivariate paths.
* ``experiments`` -- config-driven pipeline and presets.
"""

from . import clustering, dynamics, experiments, graphs, signatures, spikes

__all__ = ["clustering", "dynamics", "experiments", "graphs", "signatures", "spikes"]

__version__ = "0.1.0"
