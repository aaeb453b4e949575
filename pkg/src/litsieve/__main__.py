"""Allow running the CLI as ``python3 -m litsieve``."""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
