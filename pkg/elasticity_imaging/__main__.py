"""CLI entry point for elasticity-imaging when run as a module."""

from elasticity_imaging.main import main

if __name__ == "__main__":
    main()
