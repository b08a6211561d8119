from frameward.cli import main
import sys

sys.exit(main())
