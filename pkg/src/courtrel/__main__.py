import sys
from courtrel.cli import main

sys.exit(main())
