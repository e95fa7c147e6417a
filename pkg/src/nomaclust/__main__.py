from nomaclust.cli import main
import sys

sys.exit(main())
