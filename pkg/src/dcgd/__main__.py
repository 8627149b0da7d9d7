import sys

from dcgd.harness.cli import main

sys.exit(main())
