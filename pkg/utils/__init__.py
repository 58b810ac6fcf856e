"""
Utility modules for the SPARC toolkit
"""
from .statistics import wilson_interval
from .gf2 import rank, row_reduce

__all__ = [
    'wilson_interval',
    'rank',
    'row_reduce',
]
