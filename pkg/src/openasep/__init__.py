"""Askey-Wilson and continuous dual Hahn processes for open ASEP."""

__version__ = "0.1.0"
