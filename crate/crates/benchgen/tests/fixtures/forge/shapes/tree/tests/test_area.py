import unittest

from shapes import circle, rectangle, square, triangle


class AreaTest(unittest.TestCase):
    def test_rectangle(self):
        self.assertEqual(rectangle(2, 3), 6)

    def test_square(self):
        self.assertEqual(square(4), 16)

    def test_triangle(self):
        self.assertEqual(triangle(4, 3), 6)


if __name__ == "__main__":
    unittest.main()
