"""Train small MLPs, embed their trajectories by tau/kappa equivalence, and
simulate the coordinate-decay model of SGD convergence."""

__version__ = "0.1.0"
