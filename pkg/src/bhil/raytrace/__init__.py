"""Hamiltonian ray tracing, traveltimes, Lagrangian sheets and caustics"""
