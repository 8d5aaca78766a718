"""Paper records, publication groups, and descriptive statistics.

A corpus is a JSONL file with one paper per line. Records are grouped into
five-year publication windows covering 1991-2020 plus a forecast era for
2021 onward; years outside every window belong to no group.
"""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator

YEAR_MIN = 1900
YEAR_MAX = 2100

HISTORICAL = "Historical"
FORECAST_ERA = "ForecastEra"

# JSONL field names for a corpus record.
_REQUIRED_FIELDS = ("id", "title", "year", "journal")


class CorpusError(ValueError):
    """Raised when a record or corpus violates a structural contract."""


@dataclass(frozen=True, order=True)
class PublicationGroup:
    """A contiguous year range that shares one prompt template."""

    start_year: int
    end_year: int
    kind: str = HISTORICAL

    def __post_init__(self) -> None:
        if self.start_year > self.end_year:
            raise CorpusError(
                f"group start {self.start_year} after end {self.end_year}"
            )
        if self.kind not in (HISTORICAL, FORECAST_ERA):
            raise CorpusError(f"unknown group kind {self.kind!r}")

    @property
    def key(self) -> str:
        """Stable identifier such as ``1991-1995``."""
        return f"{self.start_year}-{self.end_year}"

    def __contains__(self, year: object) -> bool:
        return isinstance(year, int) and self.start_year <= year <= self.end_year


HISTORICAL_GROUPS: tuple[PublicationGroup, ...] = tuple(
    PublicationGroup(start, start + 4) for start in range(1991, 2017, 5)
)
FORECAST_GROUP = PublicationGroup(2021, 2023, kind=FORECAST_ERA)
ALL_GROUPS: tuple[PublicationGroup, ...] = HISTORICAL_GROUPS + (FORECAST_GROUP,)


def group_of(year: int) -> PublicationGroup | None:
    """Map a publication year to its group, or None when ungrouped.

    Total over all int inputs: historical windows cover 1991-2020, the
    forecast era covers 2021-2023, and every other year yields None.
    """
    for group in ALL_GROUPS:
        if year in group:
            return group
    return None


@dataclass(frozen=True)
class PaperRecord:
    """One paper as known at publication time, plus optional citations.

    citation_count is None for records whose outcome is unknown (for
    example forecast-era papers); labeling requires it to be set.
    """

    record_id: str
    title: str
    abstract: str
    keywords: tuple[str, ...]
    journal: str
    year: int
    citation_count: int | None = None

    def __post_init__(self) -> None:
        if not self.record_id:
            raise CorpusError("empty record id")
        if not self.title.strip():
            raise CorpusError(f"empty title (record {self.record_id!r})")
        if not self.journal.strip():
            raise CorpusError(f"empty journal (record {self.record_id!r})")
        if not (YEAR_MIN <= self.year <= YEAR_MAX):
            raise CorpusError(
                f"year {self.year} outside {YEAR_MIN}-{YEAR_MAX} "
                f"(record {self.record_id!r})"
            )
        if self.citation_count is not None and self.citation_count < 0:
            raise CorpusError(
                f"negative citation count (record {self.record_id!r})"
            )

    @property
    def group(self) -> PublicationGroup | None:
        return group_of(self.year)


def record_from_dict(raw: dict) -> PaperRecord:
    """Build a validated PaperRecord from a parsed JSONL object."""
    for name in _REQUIRED_FIELDS:
        if name not in raw:
            raise CorpusError(f"missing field {name!r}")
    year = raw["year"]
    if isinstance(year, bool) or not isinstance(year, int):
        raise CorpusError(f"year must be an integer, got {year!r}")
    keywords = raw.get("keywords", [])
    if isinstance(keywords, str) or not isinstance(keywords, (list, tuple)):
        raise CorpusError("keywords must be a list of strings")
    cleaned = tuple(str(k).strip() for k in keywords if str(k).strip())
    citations = raw.get("citations")
    if citations is not None:
        if isinstance(citations, bool) or not isinstance(citations, int):
            raise CorpusError(f"citations must be an integer, got {citations!r}")
    return PaperRecord(
        record_id=str(raw["id"]),
        title=str(raw["title"]).strip(),
        abstract=str(raw.get("abstract", "") or "").strip(),
        keywords=cleaned,
        journal=str(raw["journal"]).strip(),
        year=year,
        citation_count=citations,
    )


def record_to_dict(record: PaperRecord) -> dict:
    """Inverse of record_from_dict, using the on-disk field names."""
    out: dict = {
        "id": record.record_id,
        "title": record.title,
        "abstract": record.abstract,
        "keywords": list(record.keywords),
        "journal": record.journal,
        "year": record.year,
    }
    if record.citation_count is not None:
        out["citations"] = record.citation_count
    return out


@dataclass(frozen=True)
class IngestIssue:
    """One rejected or suspicious input line."""

    line_number: int
    reason: str


@dataclass
class IngestReport:
    """Outcome of an ingest pass: counts plus per-line issues."""

    total_lines: int = 0
    accepted: int = 0
    rejected: list[IngestIssue] = field(default_factory=list)
    warnings: list[IngestIssue] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.rejected and not self.warnings


def _iter_lines(source: str | Path | IO[str] | Iterable[str]) -> Iterator[str]:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as handle:
            yield from handle
    else:
        yield from source


def ingest(source: str | Path | IO[str] | Iterable[str]) -> tuple[list[PaperRecord], IngestReport]:
    """Parse a JSONL corpus, keeping valid records and reporting the rest.

    Malformed JSON, missing fields, invalid values, and duplicate ids are
    rejected line by line; a missing abstract is accepted with a warning.
    Input order is preserved.
    """
    records: list[PaperRecord] = []
    report = IngestReport()
    seen_ids: set[str] = set()
    for line_number, line in enumerate(_iter_lines(source), start=1):
        if not line.strip():
            continue
        report.total_lines += 1
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            report.rejected.append(IngestIssue(line_number, f"invalid JSON: {exc.msg}"))
            continue
        if not isinstance(raw, dict):
            report.rejected.append(IngestIssue(line_number, "line is not a JSON object"))
            continue
        try:
            record = record_from_dict(raw)
        except CorpusError as exc:
            report.rejected.append(IngestIssue(line_number, str(exc)))
            continue
        if record.record_id in seen_ids:
            report.rejected.append(
                IngestIssue(line_number, f"duplicate id {record.record_id!r}")
            )
            continue
        seen_ids.add(record.record_id)
        if not record.abstract:
            report.warnings.append(
                IngestIssue(line_number, f"missing abstract (record {record.record_id!r})")
            )
        records.append(record)
        report.accepted += 1
    return records, report


def write_records(records: Iterable[PaperRecord], path: str | Path) -> None:
    """Write records as JSONL with stable key order."""
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record_to_dict(record), sort_keys=True))
            handle.write("\n")


@dataclass(frozen=True)
class GroupStats:
    """Citation-count statistics for one publication group."""

    count: int
    mean: float
    median: float
    sd: float
    iqr: float
    max: int


@dataclass(frozen=True)
class CorpusSummary:
    """Descriptive statistics over a record set.

    groups holds per-group citation stats in canonical group order;
    counts across groups plus ungrouped_count sum to total_records.
    The never/low-cited fractions describe the same record set, which is
    the top slice when a slice_percent was requested.
    """

    total_records: int
    groups: dict[PublicationGroup, GroupStats]
    ungrouped_count: int
    never_cited_count: int
    never_cited_fraction: float
    low_cited_count: int
    low_cited_fraction: float
    slice_percent: float | None = None


LOW_CITED_MAX = 5


def _group_stats(citations: list[int]) -> GroupStats:
    # sd uses the n-1 denominator; a single observation has sd 0 by
    # convention so singleton groups stay reportable. Quartiles use
    # linear interpolation between order statistics (inclusive method).
    n = len(citations)
    mean = sum(citations) / n
    median = statistics.median(citations)
    if n > 1:
        sd = math.sqrt(sum((c - mean) ** 2 for c in citations) / (n - 1))
        q1, _, q3 = statistics.quantiles(citations, n=4, method="inclusive")
        iqr = q3 - q1
    else:
        sd = 0.0
        iqr = 0.0
    return GroupStats(
        count=n, mean=mean, median=float(median), sd=sd, iqr=iqr, max=max(citations)
    )


def descriptive_stats(
    records: Iterable[PaperRecord], slice_percent: float | None = None
) -> CorpusSummary:
    """Summarize citation counts per group plus corpus-wide fractions.

    With slice_percent set, statistics cover only the per-year top slice
    at that percentage (see citecast.labeling); every record must then
    carry a citation count, and so must any record that lands in a group.
    """
    record_list = list(records)
    if slice_percent is not None:
        # Imported here because labeling builds on this module.
        from citecast import labeling

        spec = labeling.LabelSpec(k_percent=slice_percent)
        labels = labeling.label_corpus(record_list, spec)
        positive_ids = {lab.record_id for lab in labels if lab.positive}
        record_list = [r for r in record_list if r.record_id in positive_ids]

    by_group: dict[PublicationGroup, list[int]] = {}
    ungrouped = 0
    never_cited = 0
    low_cited = 0
    for record in record_list:
        if record.citation_count is None:
            raise CorpusError(
                f"unlabeled record in stats: {record.record_id!r} has no citation count"
            )
        if record.citation_count == 0:
            never_cited += 1
        if record.citation_count <= LOW_CITED_MAX:
            low_cited += 1
        group = record.group
        if group is None:
            ungrouped += 1
        else:
            by_group.setdefault(group, []).append(record.citation_count)

    total = len(record_list)
    groups = {
        group: _group_stats(by_group[group]) for group in ALL_GROUPS if group in by_group
    }
    return CorpusSummary(
        total_records=total,
        groups=groups,
        ungrouped_count=ungrouped,
        never_cited_count=never_cited,
        never_cited_fraction=(never_cited / total) if total else 0.0,
        low_cited_count=low_cited,
        low_cited_fraction=(low_cited / total) if total else 0.0,
        slice_percent=slice_percent,
    )
