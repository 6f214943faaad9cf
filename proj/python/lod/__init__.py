"""Proposal ranking for large-scale unsupervised object discovery."""

from ._lod import *  # noqa: F401,F403
from ._lod import __version__  # noqa: F401
