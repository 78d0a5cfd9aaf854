"""Name-field normalisation, lexicon / wordlist matching and group assignment."""

from __future__ import annotations

import csv
import enum
import hashlib
import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

IMPRESSION_PAIRS: tuple[tuple[str, str], ...] = (
    ("good", "bad"),
    ("masculine", "feminine"),
    ("classic", "modern"),
    ("mature", "youthful"),
    ("formal", "informal"),
    ("upper-class", "common"),
    ("urban", "natural"),
    ("wholesome", "devious"),
    ("strong", "delicate"),
    ("refined", "rough"),
    ("strange", "boring"),
    ("simple", "complex"),
    ("serious", "comedic"),
    ("nerdy", "unintellectual"),
)
IMPRESSIONS: tuple[str, ...] = tuple(tag for pair in IMPRESSION_PAIRS for tag in pair)
GENDERS = ("male", "female", "both")

_WORD_RE = re.compile(r"[a-z]+")


class LexiconError(ValueError):
    """A lexicon or wordlist row violates the expected format."""


class Group(enum.Enum):
    CUSTOM_CONTENT = "custom_content"
    CONTAINS_WORDS = "contains_words"
    CONTAINS_NAME = "contains_name"

    @property
    def title(self) -> str:
        return {
            Group.CUSTOM_CONTENT: "Custom Content",
            Group.CONTAINS_WORDS: "Contains Words",
            Group.CONTAINS_NAME: "Contains Name",
        }[self]


# Latin-1 Supplement and Latin Extended-A letters that do not decompose to a
# base letter under NFKD.
_SPECIAL = {
    "Æ": "ae", "æ": "ae", "Ð": "d", "ð": "d", "Ø": "o", "ø": "o",
    "Þ": "th", "þ": "th", "ß": "ss", "Đ": "d", "đ": "d", "Ħ": "h", "ħ": "h",
    "ı": "i", "ĸ": "k", "Ŀ": "l", "ŀ": "l", "Ł": "l", "ł": "l", "ŉ": "n",
    "Ŋ": "ng", "ŋ": "ng", "Œ": "oe", "œ": "oe", "Ŧ": "t", "ŧ": "t", "ſ": "s",
}


def _build_translit() -> dict[int, str]:
    table: dict[int, str] = {}
    for cp in range(128):
        ch = chr(cp)
        table[cp] = ch.lower() if ch.isascii() and ch.isalpha() else " "
    for cp in range(0x00C0, 0x0180):
        ch = chr(cp)
        if ch in _SPECIAL:
            table[cp] = _SPECIAL[ch]
            continue
        base = "".join(
            c for c in unicodedata.normalize("NFKD", ch) if c.isascii() and c.isalpha()
        )
        table[cp] = base.lower() if base else " "
    return table


_TRANSLIT = _build_translit()


def normalize_name_field(name_field: str) -> list[str]:
    """ASCII-fold, lower-case and split a name field into letter tokens.

    Latin-1 / Latin Extended-A letters lose their diacritics; any other
    non-ASCII character acts as a separator.

    >>> normalize_name_field("José Müller")
    ['jose', 'muller']
    """
    folded = "".join(_TRANSLIT.get(ord(ch), " ") for ch in name_field)
    return _WORD_RE.findall(folded)


@dataclass(frozen=True)
class NameEntry:
    name: str
    gender: str
    impressions: frozenset[str]

    def __post_init__(self):
        if not _WORD_RE.fullmatch(self.name):
            raise LexiconError(f"name {self.name!r} must match [a-z]+")
        if self.gender not in GENDERS:
            raise LexiconError(f"gender {self.gender!r} not in {GENDERS}")
        unknown = set(self.impressions) - set(IMPRESSIONS)
        if unknown:
            raise LexiconError(f"unknown impressions {sorted(unknown)}")

    @property
    def is_male(self) -> bool:
        return self.gender in ("male", "both")

    @property
    def is_female(self) -> bool:
        return self.gender in ("female", "both")


class NameLexicon:
    """Immutable mapping from given name to its gender and impression tags."""

    def __init__(self, entries: Iterable[NameEntry]):
        table: dict[str, NameEntry] = {}
        for e in entries:
            if e.name in table:
                raise LexiconError(f"duplicate name {e.name!r}")
            table[e.name] = e
        self._entries: Mapping[str, NameEntry] = table

    def __contains__(self, name: object) -> bool:
        return name in self._entries

    def __getitem__(self, name: str) -> NameEntry:
        return self._entries[name]

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def entries(self) -> list[NameEntry]:
        return list(self._entries.values())

    def gender_counts(self) -> dict[str, int]:
        counts = {g: 0 for g in GENDERS}
        for e in self._entries.values():
            counts[e.gender] += 1
        return counts

    def impression_counts(self) -> dict[str, int]:
        counts = {t: 0 for t in IMPRESSIONS}
        for e in self._entries.values():
            for t in e.impressions:
                counts[t] += 1
        return counts

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for name in sorted(self._entries):
            e = self._entries[name]
            h.update(f"{name},{e.gender},{';'.join(sorted(e.impressions))}\n".encode())
        return h.hexdigest()

    @classmethod
    def from_csv(cls, path: str | Path) -> "NameLexicon":
        """Load ``name,gender,tag1;tag2;...`` rows; a leading header row is allowed."""
        entries = []
        with open(path, encoding="utf-8", newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or (len(row) == 1 and not row[0].strip()):
                    continue
                if lineno == 1 and [c.strip().lower() for c in row[:2]] == ["name", "gender"]:
                    continue
                if len(row) not in (2, 3):
                    raise LexiconError(f"{path}:{lineno}: expected 2 or 3 columns, got {len(row)}")
                name, gender = row[0].strip(), row[1].strip()
                tags = row[2].strip() if len(row) == 3 else ""
                impressions = frozenset(t.strip() for t in tags.split(";") if t.strip())
                try:
                    entries.append(NameEntry(name, gender, impressions))
                except LexiconError as exc:
                    raise LexiconError(f"{path}:{lineno}: {exc}") from None
        try:
            return cls(entries)
        except LexiconError as exc:
            raise LexiconError(f"{path}: {exc}") from None


class WordList:
    """Immutable set of lower-case ASCII words."""

    def __init__(self, words: Iterable[str]):
        ws = frozenset(words)
        if not ws:
            raise LexiconError("wordlist is empty")
        bad = [w for w in ws if not _WORD_RE.fullmatch(w)]
        if bad:
            raise LexiconError(f"wordlist entries must match [a-z]+: {sorted(bad)[:5]}")
        self._words = ws

    def __contains__(self, word: object) -> bool:
        return word in self._words

    def __len__(self) -> int:
        return len(self._words)

    def __iter__(self):
        return iter(sorted(self._words))

    def fingerprint(self) -> str:
        return hashlib.sha256("\n".join(sorted(self._words)).encode()).hexdigest()

    @classmethod
    def from_file(cls, path: str | Path) -> "WordList":
        words = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                w = line.strip()
                if not w:
                    continue
                if not _WORD_RE.fullmatch(w):
                    raise LexiconError(f"{path}:{lineno}: {w!r} must match [a-z]+")
                words.append(w)
        return cls(words)


def assign_group(name_field: str | Sequence[str], lexicon: NameLexicon, words: WordList) -> Group:
    """Given names take priority over English words; anything else is custom content.

    Accepts a raw name field or an already-normalised token list.
    """
    tokens = normalize_name_field(name_field) if isinstance(name_field, str) else name_field
    if any(t in lexicon for t in tokens):
        return Group.CONTAINS_NAME
    if any(t in words for t in tokens):
        return Group.CONTAINS_WORDS
    return Group.CUSTOM_CONTENT


def word_fraction(tokens: Sequence[str], words: WordList) -> float:
    """Share of tokens (counted with multiplicity) found in the wordlist; 0 for no tokens."""
    if not tokens:
        return 0.0
    return sum(t in words for t in tokens) / len(tokens)


@dataclass(frozen=True)
class NameAttributes:
    is_male: bool
    is_female: bool
    impressions: tuple[bool, ...]  # aligned with IMPRESSIONS


def name_attributes(tokens: Sequence[str], lexicon: NameLexicon) -> NameAttributes:
    """Union of gender and impression flags over every token found in the lexicon."""
    matched = [lexicon[t] for t in tokens if t in lexicon]
    if not matched:
        raise LexiconError("no token matches the name lexicon")
    tags = set().union(*(e.impressions for e in matched))
    return NameAttributes(
        is_male=any(e.is_male for e in matched),
        is_female=any(e.is_female for e in matched),
        impressions=tuple(t in tags for t in IMPRESSIONS),
    )


def load_default_lexicon() -> NameLexicon:
    return NameLexicon.from_csv(_data_path("names.csv"))


def load_default_wordlist() -> WordList:
    return WordList.from_file(_data_path("words.txt"))


def _data_path(name: str) -> Path:
    return Path(__file__).parent / "data" / name
