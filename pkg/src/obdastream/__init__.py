"""Ontology-mediated analytical queries over live and archived streams."""

__version__ = "0.1.0"
