import sys

from poik.cli import main

sys.exit(main())
