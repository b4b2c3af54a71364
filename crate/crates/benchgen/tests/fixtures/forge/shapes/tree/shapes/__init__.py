from .area import circle, rectangle, square, triangle

__all__ = ["circle", "rectangle", "square", "triangle"]
