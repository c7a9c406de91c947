"""Output symbol inventory with reserved blank/space/noise entries."""
from __future__ import annotations

import string
from pathlib import Path

BLANK = "<blank>"
SPACE = "<space>"
NOISE = "<noise>"
RESERVED = (BLANK, SPACE, NOISE)


class AlphabetError(ValueError):
    pass


class OutOfAlphabetError(AlphabetError):
    def __init__(self, symbol: str, where: str = ""):
        self.symbol = symbol
        msg = f"symbol {symbol!r} is not in the alphabet"
        if where:
            msg += f" ({where})"
        super().__init__(msg)


class Alphabet:
    """Ordered symbol set; blank is always index 0.

    Text rendering maps the space symbol to ``' '`` and the noise symbol to
    ``noise_marker``.  Every other symbol must be a single character.
    """

    def __init__(self, symbols, noise_marker: str = "~"):
        symbols = list(symbols)
        if len(symbols) < 2:
            raise AlphabetError("an alphabet needs at least blank plus one symbol")
        if symbols[0] != BLANK:
            raise AlphabetError(f"index 0 must be {BLANK}, got {symbols[0]!r}")
        if len(set(symbols)) != len(symbols):
            dup = sorted({s for s in symbols if symbols.count(s) > 1})
            raise AlphabetError(f"duplicate symbols: {dup}")
        for s in symbols:
            if s not in RESERVED and len(s) != 1:
                raise AlphabetError(f"non-reserved symbols must be single characters, got {s!r}")
            if s == " " or s == noise_marker:
                raise AlphabetError(f"{s!r} collides with a reserved rendering")
        self.symbols = tuple(symbols)
        self.noise_marker = noise_marker
        self._index = {s: i for i, s in enumerate(self.symbols)}
        self._render = {}
        for i, s in enumerate(self.symbols):
            if s == SPACE:
                self._render[" "] = i
            elif s == NOISE:
                self._render[noise_marker] = i
            elif s != BLANK:
                self._render[s] = i

    blank = 0

    @classmethod
    def english(cls, **kw) -> "Alphabet":
        return cls(list(RESERVED) + list(string.ascii_lowercase), **kw)

    @classmethod
    def from_letters(cls, letters, **kw) -> "Alphabet":
        return cls(list(RESERVED) + list(letters), **kw)

    @classmethod
    def load(cls, path, **kw) -> "Alphabet":
        text = Path(path).read_text(encoding="utf-8")
        lines = [ln for ln in text.split("\n")]
        if lines and lines[-1] == "":
            lines.pop()
        return cls(lines, **kw)

    def save(self, path) -> None:
        Path(path).write_text("".join(s + "\n" for s in self.symbols), encoding="utf-8")

    def __len__(self) -> int:
        return len(self.symbols)

    def __eq__(self, other) -> bool:
        return isinstance(other, Alphabet) and self.symbols == other.symbols

    def __hash__(self):
        return hash(self.symbols)

    def __repr__(self) -> str:
        return f"Alphabet({len(self)} symbols)"

    @property
    def space(self):
        return self._index.get(SPACE)

    @property
    def noise(self):
        return self._index.get(NOISE)

    def index(self, symbol: str) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise OutOfAlphabetError(symbol) from None

    def encode(self, text: str, where: str = "") -> list[int]:
        """Text to label indices; raises OutOfAlphabetError on unknown characters."""
        out = []
        i = 0
        marker = self.noise_marker
        while i < len(text):
            if marker and text.startswith(marker, i) and marker in self._render:
                out.append(self._render[marker])
                i += len(marker)
                continue
            ch = text[i]
            if ch not in self._render:
                raise OutOfAlphabetError(ch, where)
            out.append(self._render[ch])
            i += 1
        return out

    def decode(self, labels) -> str:
        parts = []
        for k in labels:
            s = self.symbols[int(k)]
            if s == BLANK:
                raise AlphabetError("blank cannot be rendered as text")
            if s == SPACE:
                parts.append(" ")
            elif s == NOISE:
                parts.append(self.noise_marker)
            else:
                parts.append(s)
        return "".join(parts)

    def to_list(self) -> list[str]:
        return list(self.symbols)
