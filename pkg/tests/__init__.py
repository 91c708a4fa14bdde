"""Tests for the elasticity-imaging package."""
