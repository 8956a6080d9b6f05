"Finite-dimensional estimates for operator and commutator Lipschitz functions."

__version__ = "0.1.0"
