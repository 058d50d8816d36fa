"""Missing-digit fractals: exact measures, Fourier bounds, rational point counts."""

from ._core import *  # noqa: F401,F403
from ._core import DigitfracError, DigitSystem, __version__  # noqa: F401
