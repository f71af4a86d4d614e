"""Test suite for Curavoice backend"""

