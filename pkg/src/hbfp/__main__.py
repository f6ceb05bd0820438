import sys

from hbfp.cli import main

sys.exit(main())
