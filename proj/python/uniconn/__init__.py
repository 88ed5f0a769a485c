"""Python bindings for the uniconn C++ core."""

from ._uniconn import *  # noqa: F401,F403
from ._uniconn import __version__
