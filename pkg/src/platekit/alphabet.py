"""Token alphabets and their procedural glyph bitmaps.

An alphabet is an ordered token list in three contiguous groups:
province marks, letters, digits. IDs are dense from 0 in that order;
the blank class used by the sequence loss is implicit and always the
last class (id = token count). Glyphs are 7x5 monochrome bitmaps:
letters and digits come from a fixed dot-matrix font, province marks
are dense generated patterns kept distinct by construction (their top
row encodes the province index in binary).
"""

import base64

import numpy as np

from .errors import DataError, InvalidTokenError

GLYPH_H, GLYPH_W = 7, 5

_FONT = {
    "A": ".###.|#...#|#...#|#####|#...#|#...#|#...#",
    "B": "####.|#...#|#...#|####.|#...#|#...#|####.",
    "C": ".###.|#...#|#....|#....|#....|#...#|.###.",
    "D": "####.|#...#|#...#|#...#|#...#|#...#|####.",
    "E": "#####|#....|#....|####.|#....|#....|#####",
    "F": "#####|#....|#....|####.|#....|#....|#....",
    "G": ".###.|#...#|#....|#.###|#...#|#...#|.###.",
    "H": "#...#|#...#|#...#|#####|#...#|#...#|#...#",
    "I": ".###.|..#..|..#..|..#..|..#..|..#..|.###.",
    "J": "..###|...#.|...#.|...#.|...#.|#..#.|.##..",
    "K": "#...#|#..#.|#.#..|##...|#.#..|#..#.|#...#",
    "L": "#....|#....|#....|#....|#....|#....|#####",
    "M": "#...#|##.##|#.#.#|#.#.#|#...#|#...#|#...#",
    "N": "#...#|##..#|#.#.#|#..##|#...#|#...#|#...#",
    "O": ".###.|#...#|#...#|#...#|#...#|#...#|.###.",
    "P": "####.|#...#|#...#|####.|#....|#....|#....",
    "Q": ".###.|#...#|#...#|#...#|#.#.#|#..#.|.##.#",
    "R": "####.|#...#|#...#|####.|#.#..|#..#.|#...#",
    "S": ".####|#....|#....|.###.|....#|....#|####.",
    "T": "#####|..#..|..#..|..#..|..#..|..#..|..#..",
    "U": "#...#|#...#|#...#|#...#|#...#|#...#|.###.",
    "V": "#...#|#...#|#...#|#...#|#...#|.#.#.|..#..",
    "W": "#...#|#...#|#...#|#.#.#|#.#.#|##.##|#...#",
    "X": "#...#|#...#|.#.#.|..#..|.#.#.|#...#|#...#",
    "Y": "#...#|#...#|.#.#.|..#..|..#..|..#..|..#..",
    "Z": "#####|....#|...#.|..#..|.#...|#....|#####",
    "0": ".###.|#...#|#..##|#.#.#|##..#|#...#|.###.",
    "1": "..#..|.##..|..#..|..#..|..#..|..#..|.###.",
    "2": ".###.|#...#|....#|...#.|..#..|.#...|#####",
    "3": ".###.|#...#|....#|..##.|....#|#...#|.###.",
    "4": "...#.|..##.|.#.#.|#..#.|#####|...#.|...#.",
    "5": "#####|#....|####.|....#|....#|#...#|.###.",
    "6": ".###.|#....|#....|####.|#...#|#...#|.###.",
    "7": "#####|....#|...#.|..#..|.#...|.#...|.#...",
    "8": ".###.|#...#|#...#|.###.|#...#|#...#|.###.",
    "9": ".###.|#...#|#...#|.####|....#|....#|.###.",
}


def _parse_glyph(text: str) -> np.ndarray:
    rows = text.split("|")
    if len(rows) != GLYPH_H or any(len(r) != GLYPH_W for r in rows):
        raise DataError(f"glyph must be {GLYPH_H}x{GLYPH_W}")
    return np.array([[ch == "#" for ch in row] for row in rows])


def _province_glyph(index: int) -> np.ndarray:
    g = np.zeros((GLYPH_H, GLYPH_W), dtype=bool)
    code = index + 1  # top row never blank, distinct per index below 31
    for j in range(GLYPH_W):
        g[0, j] = bool((code >> (GLYPH_W - 1 - j)) & 1)
    body = np.random.default_rng([977, index]).random((GLYPH_H - 1, GLYPH_W))
    g[1:] = body > 0.35
    return g


class Alphabet:
    def __init__(self, names, glyphs, n_provinces: int, n_letters: int, n_digits: int):
        if len(names) != n_provinces + n_letters + n_digits:
            raise DataError("group counts do not cover the token list")
        if len(set(names)) != len(names):
            raise DataError("token names must be unique")
        self.names = list(names)
        self.glyphs = [np.asarray(g, dtype=bool) for g in glyphs]
        for g in self.glyphs:
            if g.shape != (GLYPH_H, GLYPH_W):
                raise DataError(f"glyph shape {g.shape} != ({GLYPH_H},{GLYPH_W})")
        self.n_provinces = n_provinces
        self.n_letters = n_letters
        self.n_digits = n_digits
        self._id = {n: i for i, n in enumerate(self.names)}

    def __len__(self) -> int:
        return len(self.names)

    @property
    def provinces(self) -> range:
        return range(0, self.n_provinces)

    @property
    def letters(self) -> range:
        return range(self.n_provinces, self.n_provinces + self.n_letters)

    @property
    def digits(self) -> range:
        return range(self.n_provinces + self.n_letters, len(self.names))

    @property
    def blank_id(self) -> int:
        return len(self.names)

    @property
    def n_classes(self) -> int:
        """Token count plus the blank class."""
        return len(self.names) + 1

    def id_of(self, name: str) -> int:
        if name not in self._id:
            raise InvalidTokenError(f"unknown token name {name!r}")
        return self._id[name]

    def excluded_letter_ids(self):
        """Letters barred from the free plate positions."""
        out = []
        for bad in ("I", "O"):
            if bad in self._id and self._id[bad] in self.letters:
                out.append(self._id[bad])
        return out

    def format_ids(self, ids) -> str:
        parts = []
        for i in ids:
            i = int(i)
            if not 0 <= i < len(self.names):
                raise InvalidTokenError(f"token id {i} out of range")
            n = self.names[i]
            parts.append(n if len(n) == 1 else f"<{n}>")
        return "".join(parts)


def make_standard_alphabet() -> Alphabet:
    """31 province marks, 26 letters, 10 digits: 67 tokens, 68 classes
    with blank."""
    names, glyphs = [], []
    for i in range(31):
        names.append(f"prov{i:02d}")
        glyphs.append(_province_glyph(i))
    for ch in "ABCDEFGHIJKLMNOPQRSTUVWXYZ":
        names.append(ch)
        glyphs.append(_parse_glyph(_FONT[ch]))
    for ch in "0123456789":
        names.append(ch)
        glyphs.append(_parse_glyph(_FONT[ch]))
    return Alphabet(names, glyphs, 31, 26, 10)


def make_toy_alphabet() -> Alphabet:
    """16 tokens for desk-scale experiments: 2 province marks, 8 letters
    (I and O included so the exclusion rule stays testable), 6 digits."""
    names, glyphs = [], []
    for i in range(2):
        names.append(f"prov{i:02d}")
        glyphs.append(_province_glyph(i))
    for ch in "ABCDEFIO":
        names.append(ch)
        glyphs.append(_parse_glyph(_FONT[ch]))
    for ch in "012345":
        names.append(ch)
        glyphs.append(_parse_glyph(_FONT[ch]))
    return Alphabet(names, glyphs, 2, 8, 6)


def save_alphabet(path: str, alphabet: Alphabet) -> None:
    """One token per line: name, tab, base64 of the glyph drawn as '#'
    and '.' rows joined by newlines."""
    with open(path, "w", encoding="ascii") as fh:
        for name, glyph in zip(alphabet.names, alphabet.glyphs):
            rows = "\n".join("".join("#" if v else "." for v in row) for row in glyph)
            b64 = base64.b64encode(rows.encode("ascii")).decode("ascii")
            fh.write(f"{name}\t{b64}\n")


def load_alphabet(path: str) -> Alphabet:
    """Groups are recovered from names: single letters A-Z are letters,
    single digits are digits, anything else is a province mark. The
    three groups must appear contiguously in that order."""
    names, glyphs, kinds = [], [], []
    try:
        with open(path, encoding="ascii") as fh:
            for ln, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise DataError(f"{path}:{ln}: expected name<TAB>glyph")
                name = parts[0]
                rows = base64.b64decode(parts[1]).decode("ascii").split("\n")
                glyphs.append(_parse_glyph("|".join(rows)))
                names.append(name)
                if len(name) == 1 and name.isalpha() and name.isupper():
                    kinds.append("letter")
                elif len(name) == 1 and name.isdigit():
                    kinds.append("digit")
                else:
                    kinds.append("province")
    except FileNotFoundError as e:
        raise DataError(f"alphabet file not found: {path}") from e
    order = {"province": 0, "letter": 1, "digit": 2}
    ranks = [order[k] for k in kinds]
    if ranks != sorted(ranks):
        raise DataError(f"{path}: groups must be province, letter, digit in order")
    return Alphabet(names, glyphs, kinds.count("province"), kinds.count("letter"),
                    kinds.count("digit"))
