"""Per-year top-percentile citation labels.

Within each publication year, papers are ranked by citation count and the
top k percent are marked positive. The positive count is exact by
construction: m = max(1, floor(k * n / 100)) for a year with n papers, so
even tiny years contribute at least one positive and ties never inflate
the count.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from citecast.corpus import CorpusSummary, PaperRecord, descriptive_stats


class LabelingError(ValueError):
    """Raised when records cannot be labeled as requested."""


@dataclass(frozen=True)
class LabelSpec:
    """Labeling policy: the top-slice percentage.

    Tie handling is fixed, not configurable: records are ranked by
    citation count descending with record id ascending as tiebreak, and
    exactly the first m ranks are positive.
    """

    k_percent: float

    def __post_init__(self) -> None:
        if not (0.0 < self.k_percent <= 100.0):
            raise LabelingError(
                f"k_percent must be in (0, 100], got {self.k_percent}"
            )


@dataclass(frozen=True)
class CitationLabel:
    """Label for one record within its publication year.

    rank_in_year starts at 1 for the most cited paper of the year;
    cutoff_count is the citation count at rank m, the last positive rank.
    """

    record_id: str
    year: int
    k_percent: float
    positive: bool
    rank_in_year: int
    cutoff_count: int


def positives_per_year(year_size: int, k_percent: float) -> int:
    """Number of positives for a year with year_size papers."""
    if year_size <= 0:
        raise LabelingError(f"year size must be positive, got {year_size}")
    return max(1, math.floor(k_percent * year_size / 100.0))


def label_corpus(records: Iterable[PaperRecord], spec: LabelSpec) -> list[CitationLabel]:
    """Label every record relative to its own publication year.

    Every record must carry a citation count. Output order follows input
    order, so labels line up with the records they came from.
    """
    record_list = list(records)
    by_year: dict[int, list[PaperRecord]] = {}
    seen_ids: set[str] = set()
    for record in record_list:
        if record.citation_count is None:
            raise LabelingError(
                f"cannot label unlabeled-citation record {record.record_id!r}"
            )
        if record.record_id in seen_ids:
            raise LabelingError(f"duplicate record id {record.record_id!r}")
        seen_ids.add(record.record_id)
        by_year.setdefault(record.year, []).append(record)

    # rank: citations descending, then record id ascending. Deterministic
    # under any input permutation.
    placement: dict[str, tuple[int, bool, int]] = {}
    for year, members in by_year.items():
        ranked = sorted(members, key=lambda r: (-r.citation_count, r.record_id))
        m = positives_per_year(len(ranked), spec.k_percent)
        cutoff = ranked[m - 1].citation_count
        for index, record in enumerate(ranked, start=1):
            placement[record.record_id] = (index, index <= m, cutoff)

    labels: list[CitationLabel] = []
    for record in record_list:
        rank, positive, cutoff = placement[record.record_id]
        labels.append(
            CitationLabel(
                record_id=record.record_id,
                year=record.year,
                k_percent=spec.k_percent,
                positive=positive,
                rank_in_year=rank,
                cutoff_count=cutoff,
            )
        )
    return labels


def summarize_top_slice(records: Iterable[PaperRecord], spec: LabelSpec) -> CorpusSummary:
    """Descriptive statistics over the positives at spec.k_percent."""
    return descriptive_stats(list(records), slice_percent=spec.k_percent)


def write_labels(labels: Iterable[CitationLabel], path: str | Path) -> None:
    """Write labels as JSONL, one object per record."""
    with open(path, "w", encoding="utf-8") as handle:
        for label in labels:
            handle.write(
                json.dumps(
                    {
                        "id": label.record_id,
                        "year": label.year,
                        "k": label.k_percent,
                        "positive": label.positive,
                        "rank": label.rank_in_year,
                        "cutoff": label.cutoff_count,
                    },
                    sort_keys=True,
                )
            )
            handle.write("\n")


def read_labels(path: str | Path) -> list[CitationLabel]:
    """Inverse of write_labels."""
    labels: list[CitationLabel] = []
    with open(path, encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                labels.append(
                    CitationLabel(
                        record_id=str(raw["id"]),
                        year=int(raw["year"]),
                        k_percent=float(raw["k"]),
                        positive=bool(raw["positive"]),
                        rank_in_year=int(raw["rank"]),
                        cutoff_count=int(raw["cutoff"]),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise LabelingError(f"bad label line {line_number}: {exc}") from exc
    return labels
