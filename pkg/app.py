#!/usr/bin/env python3
"""
busroute - semi-dynamic bus routing from historical trip data.

This is the main entry point for the application.
"""

from busroute.cli import main

if __name__ == "__main__":
    exit(main())
