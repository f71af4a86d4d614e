"""Contract tests"""

