import sys

from qsynth.cli import main

sys.exit(main())
