"""hardnet: verification toolkit for hard-instance ReLU networks.

Exact-rational ReLU network IR, sign/indicator gadget constructions,
compressible Boolean families (parity, learning-with-rounding, keyed toy),
Boolean-to-Gaussian lifts with exact identity checks, statistical-query
simulation and distinguishing games, and a GF(2) parity-recovery attack.
"""
from __future__ import annotations

__version__ = "0.1.0"

__all__ = ["__version__"]
