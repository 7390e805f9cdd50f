#!/usr/bin/env python3
"""
Main entry point for the dendrite dynamics toolkit
Forwards the command line to the CLI
"""

import sys
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from src.app.cli import run


def main():
    """Run one toolkit subcommand"""
    try:
        return run(sys.argv[1:])
    except KeyboardInterrupt:
        print("\n🛑 Run stopped by user", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
