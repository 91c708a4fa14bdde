"""Run the elasticity-imaging CLI from a source checkout."""

from elasticity_imaging.main import main

if __name__ == "__main__":
    main()
