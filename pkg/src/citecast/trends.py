"""Key-phrase extraction over predicted hits, and theme grouping.

Tokens from titles and abstracts form a co-occurrence graph: an
undirected edge joins two distinct tokens whenever they appear within a
small sliding window, weighted by how often that happens. Tokens are
scored with a damped weighted random-walk recursion; the top third of
tokens become keywords, maximal runs of adjacent keywords in the source
text become phrases, and phrases map onto named themes by glob patterns.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fnmatch import fnmatchcase
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence


class TrendsError(ValueError):
    """Raised when trend inputs or config are malformed."""


@dataclass(frozen=True)
class RankConfig:
    """Knobs for graph construction and ranking.

    Defaults: damping 0.85, convergence when no score moves more than
    1e-6 (capped at 100 sweeps), window 2, and the top third of tokens
    kept as keywords.
    """

    damping: float = 0.85
    epsilon: float = 1e-6
    max_iterations: int = 100
    window: int = 2
    top_fraction: float = 1.0 / 3.0

    def __post_init__(self) -> None:
        if not (0.0 < self.damping < 1.0):
            raise TrendsError("damping must be in (0, 1)")
        if self.epsilon <= 0:
            raise TrendsError("epsilon must be positive")
        if self.max_iterations < 1:
            raise TrendsError("max_iterations must be >= 1")
        if self.window < 2:
            raise TrendsError("window must be >= 2")
        if not (0.0 < self.top_fraction <= 1.0):
            raise TrendsError("top_fraction must be in (0, 1]")


_WORD = re.compile(r"[a-z0-9]+(?:[-'][a-z0-9]+)*")


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Stopword list: packaged default, or one word per line from path."""
    if path is None:
        text = resources.files("citecast").joinpath("data/stopwords.txt").read_text(
            encoding="utf-8"
        )
    else:
        text = Path(path).read_text(encoding="utf-8")
    words = set()
    for line in text.splitlines():
        word = line.strip().lower()
        if word and not word.startswith("#"):
            words.add(word)
    return frozenset(words)


def tokenize(text: str, stopwords: frozenset[str] | None = None) -> list[str]:
    """Lowercase word tokens with stopwords removed, order preserved.

    Hyphenated and apostrophized words stay single tokens; everything
    else non-alphanumeric separates tokens.
    """
    if stopwords is None:
        stopwords = load_stopwords()
    return [t for t in _WORD.findall(text.lower()) if t not in stopwords]


@dataclass
class PhraseGraph:
    """Undirected weighted co-occurrence graph."""

    adjacency: dict[str, dict[str, float]] = field(default_factory=dict)

    @property
    def nodes(self) -> list[str]:
        return sorted(self.adjacency)

    def weight(self, a: str, b: str) -> float:
        return self.adjacency.get(a, {}).get(b, 0.0)

    def add_node(self, node: str) -> None:
        self.adjacency.setdefault(node, {})

    def add_edge(self, a: str, b: str, weight: float = 1.0) -> None:
        if a == b:
            return
        self.add_node(a)
        self.add_node(b)
        self.adjacency[a][b] = self.adjacency[a].get(b, 0.0) + weight
        self.adjacency[b][a] = self.adjacency[b].get(a, 0.0) + weight


def build_graph(
    documents: Iterable[Sequence[str]], config: RankConfig = RankConfig()
) -> PhraseGraph:
    """Accumulate co-occurrence edges over tokenized documents.

    Two distinct tokens gain one unit of edge weight per window
    co-occurrence; with the default window of 2 that means adjacency.
    Isolated tokens still become nodes so every token is rankable.
    """
    graph = PhraseGraph()
    for tokens in documents:
        for token in tokens:
            graph.add_node(token)
        for i, token in enumerate(tokens):
            for j in range(i + 1, min(i + config.window, len(tokens))):
                graph.add_edge(token, tokens[j])
    return graph


def rank(graph: PhraseGraph, config: RankConfig = RankConfig()) -> dict[str, float]:
    """Score nodes by the damped weighted recursion.

    score(v) = (1 - d) + d * sum over neighbors u of
               weight(u, v) / total weight at u * score(u)

    All scores start at 1.0; sweeps stop when the largest absolute
    change drops below epsilon or max_iterations is reached. Isolated
    nodes settle at 1 - d.
    """
    nodes = graph.nodes
    scores = {node: 1.0 for node in nodes}
    strength = {
        node: sum(graph.adjacency[node].values()) for node in nodes
    }
    for _ in range(config.max_iterations):
        delta = 0.0
        updated: dict[str, float] = {}
        for node in nodes:
            incoming = sum(
                weight / strength[neighbor] * scores[neighbor]
                for neighbor, weight in graph.adjacency[node].items()
            )
            value = (1.0 - config.damping) + config.damping * incoming
            updated[node] = value
            delta = max(delta, abs(value - scores[node]))
        scores = updated
        if delta < config.epsilon:
            break
    return scores


def select_keywords(
    scores: Mapping[str, float], config: RankConfig = RankConfig()
) -> set[str]:
    """Keep the top fraction of tokens by score.

    At least one token survives; ties break by score descending then
    token ascending, so the cut is deterministic.
    """
    if not scores:
        return set()
    ordered = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    keep = max(1, int(len(ordered) * config.top_fraction))
    return {token for token, _ in ordered[:keep]}


def extract_phrases(
    documents: Iterable[Sequence[str]],
    keywords: set[str],
    min_length: int = 1,
) -> dict[str, int]:
    """Count maximal runs of adjacent keywords as phrases.

    A phrase is a maximal contiguous stretch of keyword tokens inside
    one document; each occurrence counts once. Runs shorter than
    min_length tokens are dropped.
    """
    counts: dict[str, int] = {}
    for tokens in documents:
        run: list[str] = []
        for token in tokens:
            if token in keywords:
                run.append(token)
                continue
            if len(run) >= min_length:
                phrase = " ".join(run)
                counts[phrase] = counts.get(phrase, 0) + 1
            run = []
        if len(run) >= min_length:
            phrase = " ".join(run)
            counts[phrase] = counts.get(phrase, 0) + 1
    return counts


def ranked_phrases(counts: Mapping[str, int]) -> list[tuple[str, int]]:
    """Phrases by frequency descending, then alphabetically."""
    return sorted(counts.items(), key=lambda item: (-item[1], item[0]))


@dataclass(frozen=True)
class ThemeMap:
    """Ordered glob patterns mapping phrases onto named themes.

    First matching theme wins; unmatched phrases land in the catch-all
    bucket named by other_name.
    """

    themes: tuple[tuple[str, tuple[str, ...]], ...]
    other_name: str = "other"

    def classify(self, phrase: str) -> str:
        for name, patterns in self.themes:
            for pattern in patterns:
                if fnmatchcase(phrase, pattern):
                    return name
        return self.other_name


def load_theme_map(path: str | Path | None = None) -> ThemeMap:
    """Theme config: packaged default, or JSON from path."""
    if path is None:
        text = resources.files("citecast").joinpath("data/themes.json").read_text(
            encoding="utf-8"
        )
    else:
        text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
        themes = tuple(
            (str(entry["name"]), tuple(str(p) for p in entry["patterns"]))
            for entry in raw["themes"]
        )
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise TrendsError(f"bad theme config: {exc}") from exc
    if not themes:
        raise TrendsError("theme config has no themes")
    return ThemeMap(themes=themes)


def theme_frequencies(
    phrase_counts: Mapping[str, int], theme_map: ThemeMap
) -> dict[str, list[tuple[str, int]]]:
    """Group phrase counts by theme.

    Every theme appears in the result, even when empty, and phrase
    totals are conserved: each phrase lands in exactly one bucket.
    """
    buckets: dict[str, list[tuple[str, int]]] = {
        name: [] for name, _ in theme_map.themes
    }
    buckets[theme_map.other_name] = []
    for phrase, count in phrase_counts.items():
        buckets[theme_map.classify(phrase)].append((phrase, count))
    for name in buckets:
        buckets[name].sort(key=lambda item: (-item[1], item[0]))
    return buckets


def treemap_export(themed: Mapping[str, list[tuple[str, int]]]) -> dict:
    """Nested structure ready for treemap-style visualization."""
    children = []
    for theme, phrases in themed.items():
        total = sum(count for _, count in phrases)
        children.append(
            {
                "name": theme,
                "value": total,
                "children": [
                    {"name": phrase, "value": count} for phrase, count in phrases
                ],
            }
        )
    children.sort(key=lambda child: (-child["value"], child["name"]))
    return {"name": "themes", "children": children}


def phrase_trends(
    texts: Iterable[str],
    config: RankConfig = RankConfig(),
    stopwords: frozenset[str] | None = None,
    theme_map: ThemeMap | None = None,
) -> tuple[dict[str, int], dict[str, list[tuple[str, int]]]]:
    """End-to-end pass from raw texts to phrase counts and theme buckets."""
    if stopwords is None:
        stopwords = load_stopwords()
    if theme_map is None:
        theme_map = load_theme_map()
    documents = [tokenize(text, stopwords) for text in texts]
    graph = build_graph(documents, config)
    scores = rank(graph, config)
    keywords = select_keywords(scores, config)
    counts = extract_phrases(documents, keywords)
    return counts, theme_frequencies(counts, theme_map)
