import sys

from src.fcreg.cli import main


if __name__ == "__main__":
    sys.exit(main())
