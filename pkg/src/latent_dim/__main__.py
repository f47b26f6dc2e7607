"""Run the command line interface with `python -m latent_dim`."""

import sys

from .entrypoints.cli import main

sys.exit(main())
