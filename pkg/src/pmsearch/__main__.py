import sys

from pmsearch.cli import main

sys.exit(main())
