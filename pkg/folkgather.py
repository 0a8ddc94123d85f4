#!/usr/bin/env python3
"""Top-level wrapper script for folkgather.

Allows running directly: python folkgather.py <command> [args]
"""

from folkgather.cli import main

if __name__ == "__main__":
    main()
