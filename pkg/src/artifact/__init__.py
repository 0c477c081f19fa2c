"""Computational toolkit for smooth mod p^r representations and the Bruhat-Tits tree of PGL2."""

__version__ = "0.1.0"
