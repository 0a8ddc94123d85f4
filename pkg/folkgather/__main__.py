"""Allow running as: python -m folkgather"""

from folkgather.cli import main

if __name__ == "__main__":
    main()
