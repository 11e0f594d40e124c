"""Python bindings for the temporal correlation graph ransomware detector."""

from ._core import *  # noqa: F401,F403
from ._core import __version__, TcgError  # noqa: F401
