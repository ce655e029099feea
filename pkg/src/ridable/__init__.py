"""Second-order Riemannian trust-region optimization for ridable-saddle problems."""
__version__ = "0.1.0"
