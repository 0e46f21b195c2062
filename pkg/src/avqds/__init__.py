"""Adaptive variational quantum dynamics on a classical statevector.

Qubit 0 is the least-significant bit of every basis index.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"
