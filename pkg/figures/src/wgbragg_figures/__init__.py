"""Render figures from wgbragg delimited result files.

This package talks to the simulation toolkit only through its files: the
CSV (or JSON) outputs with their '# key: value' metadata headers.  It never
imports the simulator.
"""

__version__ = "0.1.0"

from .io import SchemaError, read_table
from .render import render_file

__all__ = ["SchemaError", "read_table", "render_file", "__version__"]
