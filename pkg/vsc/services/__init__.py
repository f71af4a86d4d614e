"""Numerical services: LTI algebra, plant, constraints, synthesis, simulation"""
