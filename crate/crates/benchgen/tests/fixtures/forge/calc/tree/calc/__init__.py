from ._version import VERSION
from .ops import add, divide, multiply, subtract

__all__ = ["VERSION", "add", "divide", "multiply", "subtract"]
