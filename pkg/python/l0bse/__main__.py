# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
import sys

from .cli import main

sys.exit(main())
