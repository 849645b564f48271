import sys

from hyquls.cli import main

sys.exit(main())
