#!/usr/bin/env python3
"""
InfoMarket entry point
Usage: python infomarket.py <simulate|analyze|info|demo|config-docs> [options]
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), 'src'))

from cli_io import main  # noqa: E402

if __name__ == "__main__":
    main()
