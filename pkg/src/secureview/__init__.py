"""Module privacy in workflow provenance: possible worlds, safe views and
minimum-cost hiding."""

__version__ = "0.1.0"
