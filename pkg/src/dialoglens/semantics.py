"""Lexicon-driven semantic measurements over code-switched text.

Three instruments live here: a bilingual math glossary matcher, a
category word counter compatible with the classic %-delimited dictionary
format (exact tokens plus `stem*` prefixes), and a pluggable
Chinese-to-English translation step used to standardize text before
embedding scoring. Latin tokens are matched case-insensitively as whole
words; CJK entries are matched as substrings, longest first.
"""

from __future__ import annotations

import json
import os
import re
import threading
import urllib.error
import urllib.request
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Union

from .corpus import _LATIN_RUN_RE, is_cjk

# Category short names in canonical order (sentiment, cognition, topic).
TABLE_CATEGORIES = (
    "PE", "NE", "Anger", "Anxiety", "Risk", "Assent", "Negation", "Affect",
    "Tent", "Cert", "Insight", "Caus", "Conj", "Filler", "Int", "Diff",
    "Comp", "QU", "Leisure",
)


class TranslationWarning(UserWarning):
    """A CJK span had no translation and was passed through unchanged."""


class TranslationTransportError(RuntimeError):
    """Remote translator could not be reached; safe to retry."""


def _is_latin_word(term: str) -> bool:
    return all(ch.isascii() and (ch.isalnum() or ch.isspace()) for ch in term)


class Glossary:
    """Set of math terms matched non-overlapping, longest first.

    Latin terms match whole words only (case-insensitive); terms
    containing CJK match as raw substrings.
    """

    def __init__(self, terms: Iterable[str]):
        cleaned = {t.strip().lower() if _is_latin_word(t.strip()) else t.strip()
                   for t in terms if t.strip()}
        if not cleaned:
            raise ValueError("glossary has no terms")
        # Longest first so compound terms win over their sub-terms;
        # lexicographic tiebreak keeps scans deterministic.
        self.terms: tuple[str, ...] = tuple(sorted(cleaned, key=lambda t: (-len(t), t)))

    def __len__(self) -> int:
        return len(self.terms)

    def count(self, text: str) -> int:
        return sum(1 for _ in self.iter_matches(text))

    def iter_matches(self, text: str):
        """Yield (position, term) for non-overlapping matches, scanning left to right."""
        lowered = text.lower()
        n = len(text)
        i = 0
        while i < n:
            matched = None
            for term in self.terms:
                end = i + len(term)
                if end > n:
                    continue
                if _is_latin_word(term):
                    if lowered[i:end] != term:
                        continue
                    before_ok = i == 0 or not lowered[i - 1].isalnum() or not lowered[i - 1].isascii()
                    after_ok = end == n or not lowered[end].isalnum() or not lowered[end].isascii()
                    if before_ok and after_ok:
                        matched = term
                        break
                elif text[i:end] == term:
                    matched = term
                    break
            if matched is None:
                i += 1
            else:
                yield i, matched
                i += len(matched)


def load_glossary(path: Union[str, Path]) -> Glossary:
    """Load a glossary file: one term per line, UTF-8, `#` comments."""
    terms = []
    for raw in Path(path).read_text("utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            terms.append(line)
    return Glossary(terms)


def count_math_terms(text: str, glossary: Glossary) -> int:
    """Number of non-overlapping glossary matches in one segment's text."""
    return glossary.count(text)


class Language:
    ENGLISH = "English"
    CHINESE = "Chinese"


@dataclass(frozen=True)
class CategoryLexicon:
    """Category-tagged word patterns for one language.

    exact: token -> category names; prefixes: (stem, categories) with the
    `*` stripped, longest stem first. CJK lexicons are matched by
    substring so prefix entries collapse to their stems.
    """

    language: str
    exact: Mapping[str, frozenset[str]]
    prefixes: tuple[tuple[str, frozenset[str]], ...]

    @classmethod
    def from_patterns(cls, language: str, patterns: Mapping[str, Iterable[str]]) -> "CategoryLexicon":
        exact: dict[str, frozenset[str]] = {}
        prefixes: list[tuple[str, frozenset[str]]] = []
        for pattern, cats in patterns.items():
            pattern = pattern.strip()
            cats = frozenset(cats)
            if not pattern or not cats:
                raise ValueError(f"empty pattern or category set: {pattern!r}")
            if pattern.endswith("*"):
                stem = pattern[:-1]
                if not stem:
                    raise ValueError("bare '*' pattern")
                prefixes.append((stem.lower() if language == Language.ENGLISH else stem, cats))
            else:
                key = pattern.lower() if language == Language.ENGLISH else pattern
                exact[key] = exact.get(key, frozenset()) | cats
        prefixes.sort(key=lambda p: (-len(p[0]), p[0]))
        return cls(language, exact, tuple(prefixes))

    @property
    def categories(self) -> frozenset[str]:
        out = set()
        for cats in self.exact.values():
            out |= cats
        for _, cats in self.prefixes:
            out |= cats
        return frozenset(out)

    def match_token(self, token: str) -> frozenset[str]:
        """Categories of one Latin token (exact + prefix patterns, unioned)."""
        token = token.lower()
        cats = set(self.exact.get(token, ()))
        for stem, stem_cats in self.prefixes:
            if token.startswith(stem):
                cats |= stem_cats
        return frozenset(cats)

    def patterns_for(self, category: str) -> tuple[str, ...]:
        """All patterns (stems with `*` stripped) belonging to one category."""
        pats = [t for t, cats in self.exact.items() if category in cats]
        pats.extend(stem for stem, cats in self.prefixes if category in cats)
        return tuple(sorted(set(pats), key=lambda t: (-len(t), t)))


def load_lexicon(path: Union[str, Path], language: str) -> CategoryLexicon:
    """Parse the %-delimited dictionary format.

    Layout: a header block between two `%` lines mapping numeric id to
    category name, then `pattern<TAB>id[ id...]` entries.
    """
    lines = Path(path).read_text("utf-8").splitlines()
    try:
        first = next(i for i, ln in enumerate(lines) if ln.strip() == "%")
        second = next(i for i in range(first + 1, len(lines)) if lines[i].strip() == "%")
    except StopIteration:
        raise ValueError(f"{path}: missing %-delimited category header") from None

    id_to_name: dict[str, str] = {}
    for ln in lines[first + 1:second]:
        ln = ln.strip()
        if not ln:
            continue
        ident, name = ln.split(None, 1)
        id_to_name[ident] = name.strip()

    patterns: dict[str, set[str]] = {}
    for lineno, ln in enumerate(lines[second + 1:], start=second + 2):
        ln = ln.strip()
        if not ln:
            continue
        if "\t" not in ln:
            raise ValueError(f"{path}:{lineno}: expected pattern<TAB>ids")
        pattern, ids = ln.split("\t", 1)
        cats = set()
        for ident in ids.split():
            if ident not in id_to_name:
                raise ValueError(f"{path}:{lineno}: unknown category id {ident!r}")
            cats.add(id_to_name[ident])
        patterns.setdefault(pattern.strip(), set()).update(cats)
    return CategoryLexicon.from_patterns(language, patterns)


@dataclass(frozen=True)
class CategoryCounts:
    """Per-category match counts for one segment."""

    counts: Mapping[str, int]

    def __getitem__(self, category: str) -> int:
        return self.counts.get(category, 0)

    def items(self):
        return self.counts.items()


def _count_cjk_category(text: str, patterns: tuple[str, ...]) -> int:
    """Non-overlapping longest-first substring count for one category."""
    count = 0
    i = 0
    n = len(text)
    while i < n:
        hit = None
        for pat in patterns:
            if text.startswith(pat, i):
                hit = pat
                break
        if hit is None:
            i += 1
        else:
            count += 1
            i += len(hit)
    return count


def count_categories(
    text: str,
    english: CategoryLexicon,
    chinese: CategoryLexicon,
) -> CategoryCounts:
    """Count matched words per category, English and Chinese summed.

    Latin tokens go against the English lexicon; the raw text goes
    against the Chinese lexicon's CJK substrings, longest first and
    non-overlapping within each category.
    """
    names = sorted(english.categories | chinese.categories)
    counts = dict.fromkeys(names, 0)

    for token in _LATIN_RUN_RE.findall(text):
        for cat in english.match_token(token):
            counts[cat] += 1

    for cat in chinese.categories:
        counts[cat] += _count_cjk_category(text, chinese.patterns_for(cat))
    return CategoryCounts(counts)


class Translator(Protocol):
    def translate(self, text: str) -> str: ...


class IdentityTranslator:
    """Pass-through translator for corpora that need no translation."""

    def translate(self, text: str) -> str:
        return text


_CJK_RUN_RE = re.compile(r"[㐀-䶿一-鿿\U00020000-\U0002ebef]+")


class OfflineLexiconTranslator:
    """Deterministic dictionary translator: CJK spans -> English words.

    Within each CJK run, known terms are substituted longest first;
    characters with no entry pass through unchanged with a warning.
    """

    def __init__(self, lexicon: Mapping[str, str]):
        self.lexicon = {k.strip(): v.strip() for k, v in lexicon.items() if k.strip()}
        self._terms = sorted(self.lexicon, key=lambda t: (-len(t), t))

    def _translate_run(self, run: str) -> tuple[list[str], bool]:
        words: list[str] = []
        unknown = False
        i = 0
        while i < len(run):
            hit = None
            for term in self._terms:
                if run.startswith(term, i):
                    hit = term
                    break
            if hit is None:
                words.append(run[i])
                unknown = True
                i += 1
            else:
                words.append(self.lexicon[hit])
                i += len(hit)
        return words, unknown

    def translate(self, text: str) -> str:
        if not _CJK_RUN_RE.search(text):
            return text
        pieces: list[str] = []
        unknown_any = False
        pos = 0
        for m in _CJK_RUN_RE.finditer(text):
            head = text[pos:m.start()].strip()
            if head:
                pieces.append(head)
            words, unknown = self._translate_run(m.group())
            unknown_any = unknown_any or unknown
            pieces.extend(words)
            pos = m.end()
        tail = text[pos:].strip()
        if tail:
            pieces.append(tail)
        if unknown_any:
            warnings.warn(
                "untranslatable CJK token(s) passed through", TranslationWarning,
                stacklevel=2,
            )
        return " ".join(pieces)


def load_translation_lexicon(path: Union[str, Path]) -> OfflineLexiconTranslator:
    """Load a TSV translation lexicon: `<zh term><TAB><english>` per line."""
    mapping = {}
    for raw in Path(path).read_text("utf-8").splitlines():
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        zh, en = line.split("\t", 1)
        mapping[zh] = en
    return OfflineLexiconTranslator(mapping)


MT_URL_ENV = "DIALOGLENS_MT_URL"
MT_KEY_ENV = "DIALOGLENS_MT_KEY"


class RemoteTranslator:
    """HTTP translation client: POST {"q", "source", "target"} -> {"text"}.

    Endpoint and key come from DIALOGLENS_MT_URL / DIALOGLENS_MT_KEY
    unless given explicitly. At most `max_in_flight` requests run
    concurrently. Transport failures raise TranslationTransportError;
    an untranslatable response falls back to passthrough with a warning.
    """

    def __init__(
        self,
        url: str | None = None,
        api_key: str | None = None,
        timeout: float = 10.0,
        max_in_flight: int = 4,
    ):
        self.url = url or os.environ.get(MT_URL_ENV, "")
        if not self.url:
            raise ValueError(f"no translator endpoint; set {MT_URL_ENV}")
        self.api_key = api_key or os.environ.get(MT_KEY_ENV, "")
        self.timeout = timeout
        self._gate = threading.BoundedSemaphore(max_in_flight)

    def translate(self, text: str) -> str:
        if not _CJK_RUN_RE.search(text):
            return text
        payload = json.dumps({"q": text, "source": "zh", "target": "en"}).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        request = urllib.request.Request(self.url, data=payload, headers=headers)
        with self._gate:
            try:
                with urllib.request.urlopen(request, timeout=self.timeout) as resp:
                    body = json.loads(resp.read().decode("utf-8"))
            except (urllib.error.URLError, TimeoutError, OSError) as exc:
                raise TranslationTransportError(str(exc)) from exc
        translated = body.get("text")
        if not isinstance(translated, str) or not translated:
            warnings.warn(
                "translator returned no text; passing segment through",
                TranslationWarning,
                stacklevel=2,
            )
            return text
        return translated


def translate_segment(text: str, translator: Translator) -> str:
    """Standardize one segment to English via the configured translator."""
    return translator.translate(text)


def _data_path(name: str):
    return resources.files("dialoglens").joinpath("data", name)


def load_demo_glossary() -> Glossary:
    with resources.as_file(_data_path("math_glossary_demo.txt")) as p:
        return load_glossary(p)


def load_demo_lexicons() -> tuple[CategoryLexicon, CategoryLexicon]:
    with resources.as_file(_data_path("liwc_demo_en.dic")) as p:
        english = load_lexicon(p, Language.ENGLISH)
    with resources.as_file(_data_path("liwc_demo_zh.dic")) as p:
        chinese = load_lexicon(p, Language.CHINESE)
    return english, chinese


def load_demo_translator() -> OfflineLexiconTranslator:
    with resources.as_file(_data_path("translation_demo.tsv")) as p:
        return load_translation_lexicon(p)
