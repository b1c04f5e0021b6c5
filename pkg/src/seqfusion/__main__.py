from seqfusion.cli import main
import sys

sys.exit(main())
