"""Communication-efficient distributed sparse learning with two-way truncation."""

__version__ = "0.1.0"
