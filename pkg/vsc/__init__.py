"""Gain-scheduled variable stiffness control toolkit"""

__version__ = "0.1.0"
