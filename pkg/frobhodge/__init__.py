"""
frobhodge

Exact-arithmetic toolkit relating quantum potentials on framed Frobenius
modules to polarized variations of Hodge structure at a maximally unipotent
boundary point.
"""

__version__ = "0.1.0"
