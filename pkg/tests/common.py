"""Small helpers shared by the test modules."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SquareMap:
    """The pure squaring map z -> z^2, used as a transparent oracle map."""

    @property
    def degree(self) -> int:
        return 2

    @property
    def pole(self):
        return None

    @property
    def numer_coeffs(self):
        return (0.0, 0.0, 1.0)

    @property
    def denom_coeffs(self):
        return (1.0,)

    def __call__(self, z):
        return z * z

    def eval_array(self, z):
        return z * z

    def derivative(self, z):
        return 2.0 * z

    @property
    def critical_points(self):
        return (0.0,)


def assert_close_sets(got, expected, tol=1e-9):
    """Match two unordered point sets within tol."""
    got = [complex(g) for g in got]
    expected = [complex(e) for e in expected]
    assert len(got) == len(expected), f"{len(got)} points != {len(expected)}"
    remaining = list(expected)
    for g in got:
        best = min(range(len(remaining)), key=lambda i: abs(remaining[i] - g))
        assert abs(remaining[best] - g) < tol, f"{g} not within {tol} of {remaining}"
        remaining.pop(best)
