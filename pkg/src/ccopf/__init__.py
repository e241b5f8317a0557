"""Risk- and variance-aware electricity pricing from chance-constrained AC-OPF."""

__version__ = "0.1.0"
