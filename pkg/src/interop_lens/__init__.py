"""Cross-chain interoperability measurement engine."""

__version__ = "0.1.0"
