try:
    from ._clft import *  # noqa: F401,F403
    from ._clft import __doc__  # noqa: F401
except ImportError:
    from _clft import *  # noqa: F401,F403
