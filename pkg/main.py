"""Main entry point for the shielded-pool mixnet simulator."""

import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent))

from src.harness.cli import main


if __name__ == "__main__":
    sys.exit(main())
