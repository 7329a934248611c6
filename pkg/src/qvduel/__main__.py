import sys

from qvduel.cli import main

sys.exit(main())
