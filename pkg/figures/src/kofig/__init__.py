"""Figure rendering for koprop run directories."""

from .render import render_all
from .run_directory import RunDirectory, RunDirectoryError, SchemaError

__version__ = "0.1.0"
