#!/usr/bin/env python
"""
Entry point for the edge-placement CLI (``python -m cli``).
"""

from cli.cli import app

if __name__ == "__main__":
    app()
