"""EM for the symmetric two-component mixed linear regression model."""
__version__ = "0.1.0"
