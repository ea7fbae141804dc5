"""
Entry point for running the lab as a module
Enables running with: python -m bhil
"""

from .cli import cli_main

if __name__ == "__main__":
    cli_main()
