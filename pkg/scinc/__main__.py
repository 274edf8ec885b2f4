import sys

from scinc.main import main

sys.exit(main())
