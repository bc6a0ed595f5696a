"""Test package for fogforge."""
