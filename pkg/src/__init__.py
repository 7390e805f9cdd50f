"""
Dendrite Dynamics Toolkit - Source Package
Dendrite maps, Mobius sums and periodic structures on finite metric trees
"""

__version__ = "1.0.0"
__author__ = "Dendrite Dynamics Toolkit Team"
