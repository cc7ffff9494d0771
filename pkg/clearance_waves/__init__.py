"""
Clearance fields, propagating waves and wave envelopes for control systems among obstacles.
"""

__version__ = '0.1.0'
