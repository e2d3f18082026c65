"""Spatiotemporal graph traffic forecasting on a C++ core."""

try:
    from ._gswan import *  # noqa: F401,F403  (installed layout)
except ImportError:  # build-tree layout used by the test harness
    from _gswan import *  # noqa: F401,F403

__version__ = "0.1.0"
