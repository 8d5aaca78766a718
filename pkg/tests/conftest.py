from __future__ import annotations

import json
from pathlib import Path

import pytest

from citecast.corpus import PaperRecord
from citecast.prompting import PromptBundle, load_templates

FIXTURES = Path(__file__).parent / "fixtures"


def make_record(
    record_id: str = "r1",
    title: str = "A study of things",
    abstract: str = "We study things in depth.",
    keywords: tuple[str, ...] = ("alpha", "beta"),
    journal: str = "Journal of Things",
    year: int = 2003,
    citations: int | None = 10,
) -> PaperRecord:
    return PaperRecord(
        record_id=record_id,
        title=title,
        abstract=abstract,
        keywords=keywords,
        journal=journal,
        year=year,
        citation_count=citations,
    )


def make_bundle(record_id: str = "r1", text: str = "prompt text") -> PromptBundle:
    store = load_templates()
    group = next(iter(store.templates))
    return PromptBundle(
        record_id=record_id,
        group=group,
        template_version="v1",
        text=text,
    )


def corpus_lines(records: list[dict]) -> str:
    return "\n".join(json.dumps(r) for r in records) + "\n"


@pytest.fixture(scope="session")
def template_store():
    return load_templates()


@pytest.fixture()
def small_corpus(tmp_path: Path) -> Path:
    """Ten records in 1993 with distinct citation counts, plus two in 2003."""
    rows = []
    for i in range(10):
        rows.append(
            {
                "id": f"p{i:02d}",
                "title": f"Paper number {i} on sparse widgets",
                "abstract": f"Abstract {i}: sparse widgets and their inference.",
                "keywords": ["sparse widgets", "inference"],
                "journal": "Journal of Widgets",
                "year": 1993,
                "citations": i * 10,
            }
        )
    rows.append(
        {
            "id": "q00",
            "title": "Causal widgets in panel data",
            "abstract": "Causal inference for widget panels.",
            "keywords": ["causal inference", "panel data"],
            "journal": "Widget Economics Letters",
            "year": 2003,
            "citations": 40,
        }
    )
    rows.append(
        {
            "id": "q01",
            "title": "Bayesian widget smoothing",
            "abstract": "A Bayesian approach to widget smoothing.",
            "keywords": ["bayesian smoothing"],
            "journal": "Widget Economics Letters",
            "year": 2003,
            "citations": 3,
        }
    )
    path = tmp_path / "corpus.jsonl"
    path.write_text(corpus_lines(rows), encoding="utf-8")
    return path
