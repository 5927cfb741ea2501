import sys

from octant_spectra.cli import main

if __name__ == "__main__":
    sys.exit(main())
