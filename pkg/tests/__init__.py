"""
Dendrite Dynamics Toolkit - Tests Package
Contains all test files for the toolkit
"""
