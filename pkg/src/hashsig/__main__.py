import sys

from hashsig.cli import main

sys.exit(main())
