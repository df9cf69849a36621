"""Window-length, overlap and kernel-size experiments for sEMG frame classifiers."""

__version__ = "0.1.0"
