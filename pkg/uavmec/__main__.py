import sys

from uavmec.main import main

sys.exit(main())
