"""
Dendrite Dynamics Toolkit - Services Package
Computational services: dendrites, maps, decompositions, sieves, structures and subshifts
"""
