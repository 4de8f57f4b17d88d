import sys

from invnet.cli_io import main

sys.exit(main())
