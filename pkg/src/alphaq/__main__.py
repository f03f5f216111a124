import sys

from alphaq.cli import main

sys.exit(main())
