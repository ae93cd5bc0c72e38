import sys

from anikern.main import main

sys.exit(main())
