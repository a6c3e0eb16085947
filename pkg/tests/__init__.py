"""
Tests package for the small-cancellation forge.

This package contains unit and property tests for services and utilities.
"""
