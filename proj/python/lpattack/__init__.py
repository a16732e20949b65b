"""lp-budget adversarial attacks with sparsity and smoothness measures."""

try:
    # installed layout: the extension sits inside this package
    from ._lpattack import *  # noqa: F401,F403
    from ._lpattack import __doc__  # noqa: F401
except ImportError:
    # in-tree layout: the extension is on sys.path next to the build output
    from _lpattack import *  # noqa: F401,F403
    from _lpattack import __doc__  # noqa: F401

__version__ = "0.1.0"
