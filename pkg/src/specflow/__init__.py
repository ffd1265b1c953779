"""specflow - spectral flow and index computations for lattice operators."""

from importlib.metadata import version

__version__ = version("specflow")
