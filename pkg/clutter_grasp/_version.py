# Single source of the package version, read by setup.py and __init__.py.
__version__ = '0.1.0'
