"""Six-step text normalization: lowercase, punctuation, numbers, stop words, slang, stemming."""
from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

from .porter import porter_stem

__all__ = [
    "NormConfig",
    "WordlistError",
    "load_wordlists",
    "load_stopwords",
    "load_slang",
    "normalize",
    "porter_stem",
]

TokenList = list[str]


class WordlistError(ValueError):
    """Bad or missing stop-word / slang file."""


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0].strip()


def _read_lines(path: str | Path) -> list[str]:
    path = Path(path)
    if not path.is_file():
        raise WordlistError(f"wordlist file not found: {path}")
    return path.read_text(encoding="utf-8").splitlines()


def load_stopwords(path: str | Path) -> frozenset[str]:
    words = set()
    for line in _read_lines(path):
        line = _strip_comment(line)
        if line:
            words.add(line.lower())
    return frozenset(words)


def load_slang(path: str | Path) -> dict[str, str]:
    slang: dict[str, str] = {}
    for lineno, raw in enumerate(_read_lines(path), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        key, sep, phrase = raw.partition("\t")
        key = key.strip().lower()
        if not sep or not key:
            raise WordlistError(f"{path}:{lineno}: expected 'token<TAB>replacement'")
        if key in slang:
            raise WordlistError(f"duplicate slang key {key!r} in {path}")
        slang[key] = phrase.strip().lower()
    return slang


def load_wordlists(stopword_path: str | Path, slang_path: str | Path) -> tuple[frozenset[str], dict[str, str]]:
    return load_stopwords(stopword_path), load_slang(slang_path)


def _default_file(name: str) -> Path:
    return Path(str(resources.files(__package__).joinpath("data", name)))


DEFAULT_STOPWORDS_PATH = _default_file("onix_stopwords.txt")
DEFAULT_SLANG_PATH = _default_file("slang.tsv")


@dataclass(frozen=True)
class NormConfig:
    stopwords: frozenset[str] = frozenset()
    slang_map: Mapping[str, str] = field(default_factory=lambda: MappingProxyType({}))
    lowercase: bool = True
    punctuation: bool = True
    numbers: bool = True
    remove_stopwords: bool = True
    slang: bool = True
    stemming: bool = True

    def __post_init__(self) -> None:
        for word in self.stopwords:
            if word != word.lower() or any(ch.isspace() for ch in word):
                raise WordlistError(f"stopword {word!r} must be lowercase without whitespace")
        for key in self.slang_map:
            if key != key.lower() or any(ch.isspace() for ch in key):
                raise WordlistError(f"slang key {key!r} must be lowercase without whitespace")
        object.__setattr__(self, "stopwords", frozenset(self.stopwords))
        object.__setattr__(self, "slang_map", MappingProxyType(dict(self.slang_map)))

    @classmethod
    def standard(cls, stopword_path: str | Path | None = None, slang_path: str | Path | None = None) -> "NormConfig":
        """All six steps on, with the shipped (or given) word lists."""
        stop, slang = load_wordlists(stopword_path or DEFAULT_STOPWORDS_PATH, slang_path or DEFAULT_SLANG_PATH)
        return cls(stopwords=stop, slang_map=slang)

    @classmethod
    def disabled(cls) -> "NormConfig":
        """Whitespace tokenization only."""
        return cls(
            lowercase=False,
            punctuation=False,
            numbers=False,
            remove_stopwords=False,
            slang=False,
            stemming=False,
        )

    def with_steps(self, **flags: bool) -> "NormConfig":
        return replace(self, **flags)

    def fingerprint(self) -> str:
        """Stable text identifying this configuration (used in cache keys)."""
        flags = "".join(
            "1" if f else "0"
            for f in (self.lowercase, self.punctuation, self.numbers, self.remove_stopwords, self.slang, self.stemming)
        )
        words = ",".join(sorted(self.stopwords))
        slang = ",".join(f"{k}={v}" for k, v in sorted(self.slang_map.items()))
        return f"{flags}|{words}|{slang}"


def _is_punct(ch: str) -> bool:
    if ch.isspace():
        return False
    # punctuation, symbols, control/format characters
    return unicodedata.category(ch)[0] in "PSC"


def _is_number(ch: str) -> bool:
    return unicodedata.category(ch)[0] == "N"


class _CharTable(dict):
    """Lazily filled ``str.translate`` table keyed by code point."""

    def __init__(self, test, replacement):
        super().__init__()
        self._test = test
        self._replacement = replacement

    def __missing__(self, cp: int):
        value = self._replacement if self._test(chr(cp)) else cp
        self[cp] = value
        return value


_PUNCT_TABLE = _CharTable(_is_punct, " ")
_NUMBER_TABLE = _CharTable(_is_number, None)


def _strip_punctuation(text: str) -> str:
    return text.translate(_PUNCT_TABLE)


def _strip_numbers(text: str) -> str:
    return text.translate(_NUMBER_TABLE)


def normalize(text: str, config: NormConfig) -> TokenList:
    """Normalize ``text`` into a list of tokens, applying enabled steps in order.

    Slang replacements are passed back through punctuation, number and
    stop-word removal before stemming, so the output guarantees hold no
    matter what the dictionary contains. Stems that coincide with a stop
    word ("thinking" -> "think") are dropped as well.
    """
    if config.lowercase:
        text = text.lower()
    if config.punctuation:
        text = _strip_punctuation(text)
    if config.numbers:
        text = _strip_numbers(text)
    tokens = text.split()
    if config.remove_stopwords:
        tokens = [t for t in tokens if t not in config.stopwords]
    if config.slang and config.slang_map:
        expanded: list[str] = []
        for tok in tokens:
            phrase = config.slang_map.get(tok)
            if phrase is None:
                expanded.append(tok)
                continue
            if config.punctuation:
                phrase = _strip_punctuation(phrase)
            if config.numbers:
                phrase = _strip_numbers(phrase)
            replacement = phrase.split()
            if config.remove_stopwords:
                replacement = [t for t in replacement if t not in config.stopwords]
            expanded.extend(replacement)
        tokens = expanded
    if config.stemming:
        tokens = [porter_stem(t) for t in tokens]
        if config.remove_stopwords:
            tokens = [t for t in tokens if t not in config.stopwords]
    return tokens
