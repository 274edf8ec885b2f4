"""Solver de inclusiones monótonas por seguimiento de camino con barreras autoconcordantes."""
__version__ = "0.1.0"
