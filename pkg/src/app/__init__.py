"""
Dendrite Dynamics Toolkit - Application Package
Command-line front end and experiment orchestration
"""
