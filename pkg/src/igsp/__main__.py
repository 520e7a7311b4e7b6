import sys

from igsp.cli import main

sys.exit(main())
