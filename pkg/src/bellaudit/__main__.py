import sys

from bellaudit.cli import main

sys.exit(main())
