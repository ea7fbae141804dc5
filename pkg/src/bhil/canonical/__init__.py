"""Canonical relations of the borehole geometries and their singularities"""
