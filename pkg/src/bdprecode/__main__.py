import sys

from bdprecode.simcli import main

sys.exit(main())
