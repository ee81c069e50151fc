import sys

from platekit.cli import main

sys.exit(main())
