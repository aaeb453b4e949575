"""litsieve: toolkit for the early stages of systematic literature studies."""

__version__ = "0.1.0"
