"""Allow running cocarry as a module: python -m cocarry."""

from cocarry.cli import main

if __name__ == "__main__":
    main()
