import sys

from mgrit_advection.cli import main

sys.exit(main())
