"""Lexicon-driven shallow tagger for explicit discourse connectives.

Each post is scanned for surfaces from a connective lexicon (longest match
wins); a match counts as a discourse connective when its lexicon prior clears
a threshold or a positional cue fires, and receives the top-level sense with
the highest lexicon weight. Only the four top-level senses exist here, and
connectives never cross post boundaries. Externally produced tags can be
swapped in through the tag-import file format, making the downstream feature
pipeline tagger-agnostic.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

from .corpus import Thread
from .textprep import TokenizedPost

DEFAULT_TAU = 0.5
MAX_SURFACE_TOKENS = 4


class LexiconError(ValueError):
    """Raised for malformed or inconsistent lexicon / tag-import files."""


class SenseTag(Enum):
    """The four top-level relation senses, in fixed ordinal order."""

    TEMPORAL = 0
    CONTINGENCY = 1
    COMPARISON = 2
    EXPANSION = 3

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @classmethod
    def from_label(cls, label: str) -> "SenseTag":
        try:
            return cls[label.upper()]
        except KeyError:
            raise LexiconError(f"unknown sense {label!r}") from None


SENSES: tuple[SenseTag, ...] = tuple(SenseTag)


@dataclass(frozen=True)
class LexiconEntry:
    surface: str
    tokens: tuple[str, ...]
    discourse_prior: float
    sense_weights: tuple[float, float, float, float]

    @property
    def sense(self) -> SenseTag:
        # ties resolve to the earliest sense in ordinal order
        best = max(self.sense_weights)
        return SENSES[self.sense_weights.index(best)]


@dataclass(frozen=True)
class TaggedConnective:
    start: int
    end: int  # half-open token span within one post
    surface: str
    sense: SenseTag


@dataclass(frozen=True)
class PostDiscourse:
    tags: tuple[TaggedConnective, ...]

    def senses(self) -> tuple[SenseTag, ...]:
        return tuple(t.sense for t in self.tags)

    def __len__(self) -> int:
        return len(self.tags)


class ConnectiveLexicon:
    def __init__(self, entries: list[LexiconEntry]):
        self.entries = {e.tokens: e for e in entries}
        self._by_first: dict[str, list[LexiconEntry]] = {}
        for entry in entries:
            self._by_first.setdefault(entry.tokens[0], []).append(entry)
        for group in self._by_first.values():
            group.sort(key=lambda e: -len(e.tokens))

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, surface: str) -> bool:
        return tuple(surface.split()) in self.entries

    def candidates(self, first_token: str) -> list[LexiconEntry]:
        return self._by_first.get(first_token, [])

    def without(self, surface: str) -> "ConnectiveLexicon":
        key = tuple(surface.split())
        return ConnectiveLexicon([e for e in self.entries.values() if e.tokens != key])


def _parse_lexicon_line(line: str, line_no: int) -> LexiconEntry:
    parts = line.split("\t")
    if len(parts) != 6:
        raise LexiconError(f"line {line_no}: expected 6 tab-separated fields, got {len(parts)}")
    surface = parts[0].strip().lower()
    tokens = tuple(surface.split())
    if not tokens:
        raise LexiconError(f"line {line_no}: empty surface")
    if len(tokens) > MAX_SURFACE_TOKENS:
        raise LexiconError(f"line {line_no}: surface longer than {MAX_SURFACE_TOKENS} tokens")
    try:
        prior = float(parts[1])
        weights = tuple(float(p) for p in parts[2:6])
    except ValueError:
        raise LexiconError(f"line {line_no}: non-numeric prior or weight") from None
    if not 0.0 <= prior <= 1.0:
        raise LexiconError(f"line {line_no}: discourse_prior {prior} outside [0, 1]")
    if any(w < 0 for w in weights) or not any(w > 0 for w in weights):
        raise LexiconError(f"line {line_no}: sense weights need >=1 positive, none negative")
    return LexiconEntry(surface=surface, tokens=tokens, discourse_prior=prior, sense_weights=weights)


def load_lexicon(path: str | Path | None = None) -> ConnectiveLexicon:
    """Load a connective lexicon; None loads the shipped default."""
    if path is None:
        text = resources.files("forum_sentinel.data").joinpath("connectives.tsv").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    entries: list[LexiconEntry] = []
    seen: set[tuple[str, ...]] = set()
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        entry = _parse_lexicon_line(line, line_no)
        if entry.tokens in seen:
            raise LexiconError(f"line {line_no}: duplicate surface {entry.surface!r}")
        seen.add(entry.tokens)
        entries.append(entry)
    return ConnectiveLexicon(entries)


def tag_post(tok: TokenizedPost, lexicon: ConnectiveLexicon, tau: float = DEFAULT_TAU) -> PostDiscourse:
    """Tag explicit connectives in one post's unfiltered token stream.

    Candidate surfaces are matched over the tokens; overlaps resolve in favor
    of the longer then the leftmost match. A surviving match is accepted when
    its discourse prior is >= tau, or it opens a sentence, or it touches a
    comma. The sense is the argmax of the entry's sense weights.
    """
    tokens = tok.tokens
    n = len(tokens)
    matches: list[tuple[int, int, LexiconEntry]] = []
    for i in range(n):
        for entry in lexicon.candidates(tokens[i]):
            end = i + len(entry.tokens)
            if end <= n and tokens[i:end] == entry.tokens:
                matches.append((i, end, entry))
    matches.sort(key=lambda m: (m[0] - m[1], m[0]))  # longer first, then leftmost
    used = [False] * n
    resolved: list[tuple[int, int, LexiconEntry]] = []
    for start, end, entry in matches:
        if any(used[start:end]):
            continue
        for k in range(start, end):
            used[k] = True
        resolved.append((start, end, entry))

    sentence_starts = {s for s, _e in tok.sentences}
    tagged: list[TaggedConnective] = []
    for start, end, entry in resolved:
        cue = (
            start in sentence_starts
            or (start > 0 and tokens[start - 1] == ",")
            or (end < n and tokens[end] == ",")
        )
        if entry.discourse_prior >= tau or cue:
            tagged.append(
                TaggedConnective(start=start, end=end, surface=entry.surface, sense=entry.sense)
            )
    tagged.sort(key=lambda t: t.start)
    return PostDiscourse(tags=tuple(tagged))


# Imported tags, keyed by (course_id, thread_id, post_id).
TagImport = dict[tuple[str, str, str], tuple[tuple[int, int, SenseTag], ...]]


def tag_thread(
    thread: Thread,
    tokenized_posts: list[TokenizedPost],
    lexicon: ConnectiveLexicon,
    tau: float = DEFAULT_TAU,
    imported: TagImport | None = None,
) -> list[PostDiscourse]:
    """Tag every post of a thread independently (never across posts).

    When an import table is supplied its (span, sense) triples are returned
    verbatim for each post instead of running the matcher.
    """
    if imported is None:
        return [tag_post(tok, lexicon, tau=tau) for tok in tokenized_posts]
    out: list[PostDiscourse] = []
    for post, tok in zip(thread.posts, tokenized_posts):
        triples = imported.get((thread.course_id, thread.thread_id, post.post_id), ())
        tags = []
        prev_end = -1
        for start, end, sense in sorted(triples):
            if not (0 <= start < end <= len(tok.tokens)):
                raise LexiconError(
                    f"imported span ({start}, {end}) out of range for post {post.post_id!r}"
                )
            if start < prev_end:
                raise LexiconError(f"imported spans overlap in post {post.post_id!r}")
            prev_end = end
            tags.append(
                TaggedConnective(
                    start=start,
                    end=end,
                    surface=" ".join(tok.tokens[start:end]),
                    sense=sense,
                )
            )
        out.append(PostDiscourse(tags=tuple(tags)))
    return out


def load_tag_import(path: str | Path) -> TagImport:
    """Read a tag-import file: course, thread, post ids then start:end:Sense triples."""
    table: TagImport = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 3:
                raise LexiconError(f"line {line_no}: expected at least 3 fields")
            key = (parts[0], parts[1], parts[2])
            if key in table:
                raise LexiconError(f"line {line_no}: duplicate post record {key}")
            triples = []
            for cell in parts[3:]:
                if not cell:
                    continue
                bits = cell.split(":")
                if len(bits) != 3:
                    raise LexiconError(f"line {line_no}: bad triple {cell!r}")
                try:
                    start, end = int(bits[0]), int(bits[1])
                except ValueError:
                    raise LexiconError(f"line {line_no}: bad span in {cell!r}") from None
                triples.append((start, end, SenseTag.from_label(bits[2])))
            table[key] = tuple(triples)
    return table


def format_tag_records(thread: Thread, taggings: list[PostDiscourse]) -> list[str]:
    """Render one thread's tags in the tag-import file format."""
    lines = []
    for post, disc in zip(thread.posts, taggings):
        cells = [thread.course_id, thread.thread_id, post.post_id]
        cells += [f"{t.start}:{t.end}:{t.sense.label}" for t in disc.tags]
        lines.append("\t".join(cells))
    return lines


def sense_distribution(taggings) -> dict[SenseTag, float] | None:
    """Percentage of tagged connectives per sense; None when nothing is tagged.

    Accepts any nesting of PostDiscourse (per post, per thread, per corpus).
    """
    counts = dict.fromkeys(SENSES, 0)
    stack = list(taggings)
    while stack:
        item = stack.pop()
        if isinstance(item, PostDiscourse):
            for tag in item.tags:
                counts[tag.sense] += 1
        else:
            stack.extend(item)
    total = sum(counts.values())
    if total == 0:
        return None
    return {sense: 100.0 * counts[sense] / total for sense in SENSES}
