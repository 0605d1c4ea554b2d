import sys

from nonbayes.cli import main

sys.exit(main())
