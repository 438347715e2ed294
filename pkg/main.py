#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Stratified HJB - Main Entry Point

Runs the command line without installing the package.
"""

import sys

from stratified_hjb.main import main


if __name__ == "__main__":
    sys.exit(main())
