import sys

from fracjet.cli import main

sys.exit(main())
