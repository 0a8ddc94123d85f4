"""folkgather - Learn folksonomies from user-built saplings, weighted by expertise."""

from folkgather._version import __version__, __app_name__, DISPLAY_VERSION
