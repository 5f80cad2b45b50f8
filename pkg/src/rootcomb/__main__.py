import sys

from rootcomb.cli import main

sys.exit(main())
