"""Test suite for rc-treatment-effects."""
