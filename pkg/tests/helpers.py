"""Shared fixtures: random domain-safe expressions and sample boxes."""

import re
from pathlib import Path

import numpy as np

COORDS = ("x", "y", "z")


def random_expression(rng, depth, coords=COORDS, constants=()):
    """Text of a random expression that is smooth and finite on ``[0.2, 0.9]^n``."""
    if depth <= 0 or rng.random() < 0.2:
        r = rng.random()
        names = list(coords) + list(constants)
        if r < 0.6:
            return names[rng.integers(len(names))]
        return repr(round(float(rng.uniform(0.5, 2.0)), 3))
    sub = lambda: random_expression(rng, depth - 1, coords, constants)  # noqa: E731
    kind = rng.integers(9)
    if kind == 0:
        return f"({sub()} + {sub()})"
    if kind == 1:
        return f"({sub()} - {sub()})"
    if kind == 2:
        return f"{sub()}*{sub()}"
    if kind == 3:
        return f"{sub()}/(2 + sin({sub()}))"
    if kind == 4:
        return f"{rng.choice(['sin', 'cos', 'tanh'])}({sub()})"
    if kind == 5:
        return f"exp(tanh({sub()}))"
    if kind == 6:
        return f"sqrt(1 + ({sub()})^2)"
    if kind == 7:
        return f"ln(3 + cos({sub()}))"
    return f"-(cosh(tanh({sub()})))^{int(rng.integers(1, 4))}"


def box_points(rng, count, n=3, lo=0.2, hi=0.9):
    return rng.uniform(lo, hi, size=(n, count))


DATA = Path(__file__).resolve().parent / "data"

FUZZ_TOKENS = [
    '"', "[", "]", "=", "\n", "nan", "inf", "-1", "0", "1e400", '"sqrt(-1)"', '"x^"', "[[", "true",
    '"u1/0"', '"ln(0)"', "format = 2", "[metric]", "coords = []", 'H = ["1"]', "{", "}", ",", "#",
    '"r"', "domain = [[1, 0]]", "signature = [1, -1]", '"1/(r - r)"', "3.5", '""', "'", "\\",
]


def mutate_document(rng, text):
    """One to three random line edits: deletion, token insertion, swap or number rewrite."""
    lines = text.splitlines()
    for _ in range(int(rng.integers(1, 4))):
        kind = int(rng.integers(5))
        if not lines:
            lines = [""]
        k = int(rng.integers(len(lines)))
        if kind == 0:
            del lines[k]
        elif kind == 1:
            lines.insert(k, str(rng.choice(FUZZ_TOKENS)))
        elif kind == 2:
            line = lines[k]
            pos = int(rng.integers(len(line) + 1))
            lines[k] = line[:pos] + str(rng.choice(FUZZ_TOKENS)) + line[pos:]
        elif kind == 3:
            j = int(rng.integers(len(lines)))
            lines[k], lines[j] = lines[j], lines[k]
        else:
            lines[k] = re.sub(r"-?\d+(\.\d+)?", lambda m: str(rng.choice(["-3", "0", "1e-300", "7.25", "nan"])), lines[k])
    return "\n".join(lines) + "\n"
