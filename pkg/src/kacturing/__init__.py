"""Two-line Ising spin system with Kac interactions: particle simulation,
limit equations, and linear stability."""

__version__ = "0.1.0"
