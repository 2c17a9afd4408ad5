"""Algebra, vector fields, integration and diagnostics"""
