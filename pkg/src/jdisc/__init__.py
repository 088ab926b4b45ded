"""J-holomorphic disc fillings of tori and symplectic non-squeezing experiments."""

__version__ = "0.1.0"
