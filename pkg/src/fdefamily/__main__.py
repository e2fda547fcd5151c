import sys

from fdefamily.cli import main

sys.exit(main())
