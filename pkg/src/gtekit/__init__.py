"""Learning-less topology encoder for recommendation, with walk-count oracles and expressiveness checkers."""

__version__ = "0.1.0"
