"""Test configuration for the service suite.

Subprocess helpers live in service_process.py; test modules import them
directly (this directory is on sys.path during collection).
"""
