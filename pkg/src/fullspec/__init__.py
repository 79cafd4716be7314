"""Second-order spectral filters on node-pair signals, with expressivity and
heterophily analysis tools."""

__version__ = "0.1.0"
