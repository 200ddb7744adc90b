"""Test suite for the cocarry package."""
