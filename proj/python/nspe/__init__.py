try:
    from ._nspe import *  # noqa: F401,F403  (installed package layout)
except ImportError:  # in-tree build: extension sits on PYTHONPATH
    from _nspe import *  # noqa: F401,F403

from ._version import __version__  # noqa: F401
