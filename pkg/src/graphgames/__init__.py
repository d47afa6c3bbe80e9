"""Graph-masked neural networks and fictitious-play solvers for
stochastic differential games on graphs."""

__version__ = "0.1.0"
