"""Allow `python -m nlvae`."""

import sys

from nlvae.main import main

sys.exit(main())
