import sys

from operator_moduli.cli import main

if __name__ == "__main__":
    sys.exit(main())
