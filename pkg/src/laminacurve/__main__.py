import sys

from laminacurve.cli import main

sys.exit(main())
