import sys

from metrovqa.harness.cli import main

sys.exit(main())
