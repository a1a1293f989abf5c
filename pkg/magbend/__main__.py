import sys

from magbend.cli import main

sys.exit(main())
