"""
API Endpoints Package
"""
