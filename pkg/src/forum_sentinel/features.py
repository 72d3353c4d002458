"""Thread feature extraction under three configurations.

``edm15`` is the feature-rich lexical baseline (unigrams over a frozen
training vocabulary plus thread-structure features), ``pdtb`` is the 25-dim
discourse block derived from tagged connective senses, and ``eplusp`` is the
union of the two blocks. All vectors are sparse maps from stable feature
names to finite values.

The 25 discourse feature names, in frozen order: ``pdtb.total``; then for
each sense (temporal, contingency, comparison, expansion) the pair
``pdtb.abs.<sense>`` (count / thread length) and ``pdtb.rel.<sense>``
(count / total); then the 16 ``pdtb.pair.<s1>.<s2>`` adjacent-pair
proportions in sense-ordinal-major order.
"""

from __future__ import annotations

import hashlib
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .corpus import Label, SubForumType, Thread
from .discourse import SENSES, ConnectiveLexicon, PostDiscourse, TagImport, tag_thread
from .textprep import TokenizedPost, content_filter, prepare_text

FEATURE_CONFIGS = ("edm15", "pdtb", "eplusp")

FORUM_ORDER = (
    SubForumType.ERRATA,
    SubForumType.EXAM,
    SubForumType.LECTURE,
    SubForumType.HOMEWORK,
)

STRUCTURAL_NAMES = tuple(
    [f"forum.{f.value}" for f in FORUM_ORDER]
    + [
        "affirmation",
        "n_posts",
        "n_comments",
        "n_posts_plus_comments",
        "avg_comments_per_post",
        "n_sentences",
        "n_url",
        "n_timeref",
    ]
)

PDTB_FEATURE_NAMES = tuple(
    ["pdtb.total"]
    + [
        name
        for sense in SENSES
        for name in (f"pdtb.abs.{sense.label.lower()}", f"pdtb.rel.{sense.label.lower()}")
    ]
    + [
        f"pdtb.pair.{s1.label.lower()}.{s2.label.lower()}"
        for s1 in SENSES
        for s2 in SENSES
    ]
)


class FeatureSpace:
    """Fixed, ordered registry of feature names for one configuration."""

    def __init__(self, names: tuple[str, ...], config: str):
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        self.names = names
        self.config = config
        self._index = {name: i for i, name in enumerate(names)}
        digest = hashlib.sha256(("\n".join((config,) + names)).encode("utf-8")).hexdigest()
        self.provenance = f"{config}:{digest[:16]}"

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def index(self, name: str) -> int:
        return self._index[name]

    def __eq__(self, other) -> bool:
        return isinstance(other, FeatureSpace) and self.provenance == other.provenance

    def __hash__(self) -> int:
        return hash(self.provenance)


@dataclass
class FeatureVector:
    """Sparse feature values; only nonzero entries are stored."""

    values: dict[str, float]
    space: FeatureSpace

    def __post_init__(self):
        for name, value in self.values.items():
            if name not in self.space:
                raise ValueError(f"feature {name!r} not in space {self.space.provenance}")
            if not math.isfinite(value):
                raise ValueError(f"non-finite value for feature {name!r}")

    def get(self, name: str) -> float:
        return self.values.get(name, 0.0)


@dataclass(frozen=True)
class Vocabulary:
    """Unigram registry frozen at training time; unseen test tokens drop out."""

    index: dict[str, int]

    @property
    def size(self) -> int:
        return len(self.index)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    @property
    def tokens(self) -> frozenset[str]:
        return frozenset(self.index)


@lru_cache(maxsize=None)
def prepare_thread(thread: Thread) -> tuple[TokenizedPost, ...]:
    """Replace non-lexical spans and tokenize every post (cached per thread)."""
    return tuple(prepare_text(post.text) for post in thread.posts)


@lru_cache(maxsize=1)
def load_affirmations() -> tuple[tuple[str, ...], ...]:
    data = resources.files("forum_sentinel.data").joinpath("affirmations.txt").read_text("utf-8")
    phrases = []
    for line in data.splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            phrases.append(tuple(prepare_text(line).tokens))
    return tuple(phrases)


def build_vocabulary(training_threads: list[Thread]) -> Vocabulary:
    """Collect all distinct content-filtered tokens of the training threads."""
    if not training_threads:
        raise ValueError("cannot build a vocabulary from an empty training set")
    seen: set[str] = set()
    for thread in training_threads:
        for tok in prepare_thread(thread):
            seen.update(content_filter(tok.tokens))
    return Vocabulary(index={token: i for i, token in enumerate(sorted(seen))})


def pdtb_space() -> FeatureSpace:
    return FeatureSpace(PDTB_FEATURE_NAMES, "pdtb")


def edm15_space(vocabulary: Vocabulary) -> FeatureSpace:
    unigram_names = tuple(f"uni.{tok}" for tok in sorted(vocabulary.index))
    return FeatureSpace(STRUCTURAL_NAMES + unigram_names, "edm15")


def eplusp_space(vocabulary: Vocabulary) -> FeatureSpace:
    unigram_names = tuple(f"uni.{tok}" for tok in sorted(vocabulary.index))
    return FeatureSpace(STRUCTURAL_NAMES + unigram_names + PDTB_FEATURE_NAMES, "eplusp")


def build_space(config: str, vocabulary: Vocabulary | None = None) -> FeatureSpace:
    if config == "pdtb":
        return pdtb_space()
    if vocabulary is None:
        raise ValueError(f"config {config!r} requires a vocabulary")
    if config == "edm15":
        return edm15_space(vocabulary)
    if config == "eplusp":
        return eplusp_space(vocabulary)
    raise ValueError(f"unknown feature config {config!r}")


def _pdtb_values(taggings: list[PostDiscourse], thread_token_length: int) -> dict[str, float]:
    sense_counts = Counter()
    pair_counts = Counter()
    for disc in taggings:
        seq = disc.senses()
        sense_counts.update(seq)
        pair_counts.update(zip(seq, seq[1:]))  # pairs never cross posts
    total = sum(sense_counts.values())
    if total > 0 and thread_token_length <= 0:
        raise ValueError("thread_token_length must be positive when connectives are tagged")
    total_pairs = sum(pair_counts.values())
    values: dict[str, float] = {}
    if total:
        values["pdtb.total"] = float(total)
    for sense in SENSES:
        count = sense_counts.get(sense, 0)
        if count:
            values[f"pdtb.abs.{sense.label.lower()}"] = count / thread_token_length
            values[f"pdtb.rel.{sense.label.lower()}"] = count / total
    for s1 in SENSES:
        for s2 in SENSES:
            count = pair_counts.get((s1, s2), 0)
            if count:
                values[f"pdtb.pair.{s1.label.lower()}.{s2.label.lower()}"] = count / total_pairs
    return values


def pdtb_features(taggings: list[PostDiscourse], thread_token_length: int) -> FeatureVector:
    """The 25-dim discourse block for one thread's tagging."""
    return FeatureVector(values=_pdtb_values(taggings, thread_token_length), space=pdtb_space())


def _has_affirmation(thread: Thread, tokenized: tuple[TokenizedPost, ...]) -> bool:
    phrases = load_affirmations()
    for i, (post, tok) in enumerate(zip(thread.posts, tokenized)):
        if i == 0 or post.role.value != "student":
            continue
        tokens = tok.tokens
        for phrase in phrases:
            k = len(phrase)
            if k == 0 or k > len(tokens):
                continue
            if any(tokens[j : j + k] == phrase for j in range(len(tokens) - k + 1)):
                return True
    return False


def _edm15_values(
    thread: Thread,
    tokenized: tuple[TokenizedPost, ...],
    vocabulary: Vocabulary,
    unigram_mode: str = "counts",
) -> dict[str, float]:
    values: dict[str, float] = {}
    unigrams = Counter()
    for tok in tokenized:
        unigrams.update(t for t in content_filter(tok.tokens) if t in vocabulary)
    for token, count in unigrams.items():
        values[f"uni.{token}"] = 1.0 if unigram_mode == "binary" else float(count)

    values[f"forum.{thread.subforum.value}"] = 1.0
    if _has_affirmation(thread, tokenized):
        values["affirmation"] = 1.0
    n_posts = sum(1 for p in thread.posts if not p.is_comment)
    n_comments = sum(1 for p in thread.posts if p.is_comment)
    if n_posts:
        values["n_posts"] = float(n_posts)
        values["avg_comments_per_post"] = n_comments / n_posts
    if n_comments:
        values["n_comments"] = float(n_comments)
    if thread.posts:
        values["n_posts_plus_comments"] = float(len(thread.posts))
    n_sentences = sum(tok.n_sentences for tok in tokenized)
    if n_sentences:
        values["n_sentences"] = float(n_sentences)
    n_url = sum(tok.replaced_counts.get("URL", 0) for tok in tokenized)
    n_timeref = sum(tok.replaced_counts.get("TIMEREF", 0) for tok in tokenized)
    if n_url:
        values["n_url"] = float(n_url)
    if n_timeref:
        values["n_timeref"] = float(n_timeref)
    return values


def edm15_features(
    thread: Thread,
    tokenized: tuple[TokenizedPost, ...],
    vocabulary: Vocabulary,
    unigram_mode: str = "counts",
) -> FeatureVector:
    """The lexical-baseline block for one thread."""
    if vocabulary is None:
        raise ValueError("edm15 features require a vocabulary")
    return FeatureVector(
        values=_edm15_values(thread, tokenized, vocabulary, unigram_mode),
        space=edm15_space(vocabulary),
    )


def _thread_length(tokenized: tuple[TokenizedPost, ...], normalizer: str) -> int:
    if normalizer == "token":
        return sum(tok.n_tokens for tok in tokenized)
    if normalizer == "post":
        return len(tokenized)
    if normalizer == "sentence":
        return sum(tok.n_sentences for tok in tokenized)
    raise ValueError(f"unknown normalizer {normalizer!r}")


def vectorize(
    threads: list[Thread],
    config: str,
    vocabulary: Vocabulary | None = None,
    lexicon: ConnectiveLexicon | None = None,
    tag_imports: TagImport | None = None,
    unigram_mode: str = "counts",
    pdtb_normalizer: str = "token",
) -> list[tuple[FeatureVector, int]]:
    """Turn labeled threads into (FeatureVector, label) pairs; label 1 = intervened."""
    if config not in FEATURE_CONFIGS:
        raise ValueError(f"unknown feature config {config!r}")
    needs_lexical = config in ("edm15", "eplusp")
    needs_discourse = config in ("pdtb", "eplusp")
    if needs_lexical and vocabulary is None:
        raise ValueError(f"config {config!r} requires a vocabulary")
    if needs_discourse and lexicon is None and tag_imports is None:
        raise ValueError(f"config {config!r} requires a lexicon or imported tags")
    space = build_space(config, vocabulary)

    out: list[tuple[FeatureVector, int]] = []
    for thread in threads:
        if thread.label is None:
            raise ValueError(f"thread {thread.thread_id!r} is unlabeled; filter the corpus first")
        tokenized = prepare_thread(thread)
        values: dict[str, float] = {}
        if needs_lexical:
            values.update(_edm15_values(thread, tokenized, vocabulary, unigram_mode))
        if needs_discourse:
            taggings = tag_thread(thread, list(tokenized), lexicon, imported=tag_imports)
            length = _thread_length(tokenized, pdtb_normalizer)
            values.update(_pdtb_values(taggings, length))
        label = 1 if thread.label is Label.INTERVENED else 0
        out.append((FeatureVector(values=values, space=space), label))
    return out
