"""Layout, error-correction placement and Monte Carlo evaluation of
fault-tolerant ion-trap quantum circuits."""

__version__ = "0.1.0"
