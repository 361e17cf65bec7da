"""Calderon Lab - a desk-scale laboratory for the statistical Calderon problem.

Simulates noisy Dirichlet-to-Neumann measurements of a conductivity on the
unit disk and recovers it with a Gaussian-prior posterior-mean estimator.
"""

__version__ = "0.1.0"
__author__ = "Calderon Lab Team"
__email__ = "contact@example.com"

# Package-level imports for convenience
from calderon_lab.models.config import Settings, get_settings

__all__ = ["Settings", "get_settings", "__version__"]
