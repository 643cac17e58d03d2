"""Augmented-Lagrangian interior-point solver for sparse nonlinear programs."""

try:
    from nclsolve._core import *  # noqa: F401,F403
    from nclsolve import _core as core
except ImportError:
    # source-tree layout: the extension sits on PYTHONPATH next to the package
    from _core import *  # noqa: F401,F403
    import _core as core

__version__ = core.__version__
