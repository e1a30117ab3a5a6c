#!/usr/bin/env python3
"""
Edge-aware pre/post-processing around a standard JPEG codec
"""

from cli.main import run

if __name__ == "__main__":
    run()
