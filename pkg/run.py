#!/usr/bin/env python3
"""
Entry point for the knowledge-transfer simulator
"""
import sys

from app.cli import main

if __name__ == '__main__':
    sys.exit(main())
