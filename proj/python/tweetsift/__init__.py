"""Python interface to the tweetsift C++ core."""

try:
    from tweetsift._tweetsift import *  # noqa: F401,F403
    from tweetsift._tweetsift import __doc__  # noqa: F401
except ImportError:
    # development layout: the extension sits next to the build tree, not in the package
    from _tweetsift import *  # type: ignore  # noqa: F401,F403
    from _tweetsift import __doc__  # type: ignore  # noqa: F401

__version__ = "0.1.0"
