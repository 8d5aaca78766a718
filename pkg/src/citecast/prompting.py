"""Era-specific prompt templates and their assembly into request text.

Each publication group ships one template with five sections: task
framing, evaluation guidelines, temporal background, reference examples
(exactly three positive and three negative), and operational constraints
with the output format. Assembly substitutes one record's fields into the
constraints section and renders the sections in a fixed order.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

from citecast.corpus import (
    FORECAST_GROUP,
    PaperRecord,
    PublicationGroup,
    group_of,
)

PLACEHOLDERS = ("title", "abstract", "keywords", "year_cleaning", "publisher")

EMPTY_ABSTRACT_TEXT = "(no abstract provided)"
KEYWORD_SEPARATOR = "; "

EXAMPLES_INTRO = (
    "Below are several examples illustrating how to distinguish between "
    "highly cited and not highly cited papers."
)

_POSITIVE_LABEL = "Highly Cited"
_NEGATIVE_LABEL = "Not Highly Cited"


class TemplateError(ValueError):
    """Raised when a template is malformed or missing."""


@dataclass(frozen=True)
class ReferenceExample:
    """One worked example shown to the model before the target paper."""

    title: str
    publisher: str
    abstract: str
    keywords: str
    judgment: str

    def __post_init__(self) -> None:
        if self.judgment not in ("YES", "NO"):
            raise TemplateError(
                f"example judgment must be YES or NO, got {self.judgment!r}"
            )
        if not self.title.strip():
            raise TemplateError("empty title in reference example")

    @property
    def label(self) -> str:
        return _POSITIVE_LABEL if self.judgment == "YES" else _NEGATIVE_LABEL


@dataclass(frozen=True)
class PromptTemplate:
    """Five prompt sections for one publication group."""

    group: PublicationGroup
    version: str
    task_framing: str
    evaluation_guidelines: str
    temporal_background: str
    reference_examples: tuple[ReferenceExample, ...]
    constraints_and_format: str
    notes: str = ""

    def __post_init__(self) -> None:
        for name in (
            "task_framing",
            "evaluation_guidelines",
            "temporal_background",
            "constraints_and_format",
        ):
            if not getattr(self, name).strip():
                raise TemplateError(f"section {name} is empty ({self.group.key})")
        positives = sum(1 for e in self.reference_examples if e.judgment == "YES")
        negatives = len(self.reference_examples) - positives
        if (positives, negatives) != (3, 3):
            raise TemplateError(
                f"reference examples must be 3 positive + 3 negative, "
                f"got {positives} + {negatives} ({self.group.key})"
            )
        for name in PLACEHOLDERS:
            marker = "{" + name + "}"
            count = self.constraints_and_format.count(marker)
            if count == 0:
                raise TemplateError(f"template missing {marker} ({self.group.key})")
            if count > 1:
                raise TemplateError(
                    f"placeholder {marker} appears {count} times ({self.group.key})"
                )


@dataclass(frozen=True)
class PromptBundle:
    """Fully rendered prompt for one record."""

    record_id: str
    group: PublicationGroup
    template_version: str
    text: str

    @property
    def char_length(self) -> int:
        return len(self.text)

    @property
    def token_estimate(self) -> int:
        # Crude budget proxy: four characters per token, rounded up.
        return math.ceil(self.char_length / 4)


@dataclass
class TemplateStore:
    """Templates keyed by publication group."""

    templates: dict[PublicationGroup, PromptTemplate] = field(default_factory=dict)

    @property
    def version(self) -> str:
        versions = sorted({t.version for t in self.templates.values()})
        return ", ".join(versions) if versions else "none"

    def get(self, group: PublicationGroup) -> PromptTemplate:
        template = self.templates.get(group)
        if template is None:
            raise TemplateError(f"no template for group {group.key}")
        return template


def _template_from_dict(raw: dict, source: str) -> PromptTemplate:
    try:
        period = str(raw["period"])
        start_text, _, end_text = period.partition("-")
        start, end = int(start_text), int(end_text)
    except (KeyError, ValueError) as exc:
        raise TemplateError(f"bad period in {source}: {exc}") from exc
    group = group_of(start)
    if group is None or group.key != period:
        raise TemplateError(
            f"period {period!r} in {source} does not match a publication group"
        )
    try:
        examples = tuple(
            ReferenceExample(
                title=str(e["title"]),
                publisher=str(e["publisher"]),
                abstract=str(e["abstract"]),
                keywords=str(e["keywords"]),
                judgment=str(e["judgment"]),
            )
            for e in raw["reference_examples"]
        )
        return PromptTemplate(
            group=group,
            version=str(raw.get("version", "v1")),
            task_framing=str(raw["task_framing"]),
            evaluation_guidelines=str(raw["evaluation_guidelines"]),
            temporal_background=str(raw["temporal_background"]),
            reference_examples=examples,
            constraints_and_format=str(raw["constraints_and_format"]),
            notes=str(raw.get("notes", "")),
        )
    except KeyError as exc:
        raise TemplateError(f"missing key {exc} in {source}") from exc


def load_templates(directory: str | Path | None = None) -> TemplateStore:
    """Load all *.json templates from a directory.

    With no directory, the packaged defaults are used. Loading fails fast
    on the first malformed template.
    """
    store = TemplateStore()
    if directory is None:
        root = resources.files("citecast").joinpath("data/templates")
        entries = [(path.name, path.read_text(encoding="utf-8"))
                   for path in sorted(root.iterdir(), key=lambda p: p.name)
                   if path.name.endswith(".json")]
    else:
        base = Path(directory)
        if not base.is_dir():
            raise TemplateError(f"template directory not found: {base}")
        entries = [(path.name, path.read_text(encoding="utf-8"))
                   for path in sorted(base.glob("*.json"))]
    for name, text in entries:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise TemplateError(f"invalid JSON in {name}: {exc.msg}") from exc
        template = _template_from_dict(raw, name)
        if template.group in store.templates:
            raise TemplateError(f"duplicate template for group {template.group.key}")
        store.templates[template.group] = template
    if not store.templates:
        where = "packaged data" if directory is None else str(directory)
        raise TemplateError(f"no templates found in {where}")
    return store


def forecast_template(store: TemplateStore | None = None) -> PromptTemplate:
    """The template used for years beyond the labeled horizon."""
    if store is None:
        store = load_templates()
    return store.get(FORECAST_GROUP)


def _render_example(index: int, example: ReferenceExample) -> str:
    return (
        f"Example {index}: {example.label}\n"
        f"Title: {example.title}\n"
        f"Publisher: {example.publisher}\n"
        f"Abstract: {example.abstract}\n"
        f"Keywords: {example.keywords}\n"
        f"Judgment: {example.judgment}"
    )


def _render_examples_section(examples: Iterable[ReferenceExample]) -> str:
    blocks = [EXAMPLES_INTRO]
    blocks.extend(
        _render_example(i, example) for i, example in enumerate(examples, start=1)
    )
    return "\n\n".join(blocks)


def _fill_constraints(template: PromptTemplate, record: PaperRecord) -> str:
    abstract = record.abstract if record.abstract else EMPTY_ABSTRACT_TEXT
    values = {
        "title": record.title,
        "abstract": abstract,
        "keywords": KEYWORD_SEPARATOR.join(record.keywords),
        "year_cleaning": str(record.year),
        "publisher": record.journal,
    }
    # Single-pass substitution, not str.format: record text may contain
    # literal braces, and inserted text must never be rescanned.
    pattern = re.compile("|".join("\\{" + name + "\\}" for name in PLACEHOLDERS))
    return pattern.sub(
        lambda match: values[match.group(0)[1:-1]], template.constraints_and_format
    )


def group_for_prompt(year: int) -> PublicationGroup | None:
    """Group used to pick a template: any year past the last historical
    window falls into the forecast group."""
    if year > FORECAST_GROUP.end_year:
        return FORECAST_GROUP
    return group_of(year)


def assemble(record: PaperRecord, store: TemplateStore) -> PromptBundle:
    """Render the full prompt for one record.

    The record's year selects the template; years after the last
    historical window use the forecast template even beyond its nominal
    range. Years before the first window have no template.
    """
    group = group_for_prompt(record.year)
    if group is None:
        raise TemplateError(
            f"no template for group: year {record.year} is outside every "
            f"publication group"
        )
    template = store.get(group)
    sections = [
        template.task_framing,
        template.evaluation_guidelines,
        template.temporal_background,
        _render_examples_section(template.reference_examples),
        _fill_constraints(template, record),
    ]
    text = "\n\n".join(sections) + "\n"
    return PromptBundle(
        record_id=record.record_id,
        group=group,
        template_version=template.version,
        text=text,
    )


def write_bundles(bundles: Iterable[PromptBundle], path: str | Path) -> None:
    """Write bundles as JSONL; lengths are included for quick budgeting."""
    with open(path, "w", encoding="utf-8") as handle:
        for bundle in bundles:
            handle.write(
                json.dumps(
                    {
                        "id": bundle.record_id,
                        "group": bundle.group.key,
                        "template_version": bundle.template_version,
                        "char_length": bundle.char_length,
                        "token_estimate": bundle.token_estimate,
                        "text": bundle.text,
                    },
                    sort_keys=True,
                )
            )
            handle.write("\n")


def read_bundles(path: str | Path) -> list[PromptBundle]:
    """Inverse of write_bundles; derived lengths are recomputed."""
    bundles: list[PromptBundle] = []
    with open(path, encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                period = str(raw["group"])
                start = int(period.partition("-")[0])
                group = group_for_prompt(start)
                if group is None or group.key != period:
                    raise ValueError(f"unknown group {period!r}")
                bundles.append(
                    PromptBundle(
                        record_id=str(raw["id"]),
                        group=group,
                        template_version=str(raw["template_version"]),
                        text=str(raw["text"]),
                    )
                )
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise TemplateError(f"bad bundle line {line_number}: {exc}") from exc
    return bundles
