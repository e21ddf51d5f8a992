"""Tests for the piecewise_convex package."""
