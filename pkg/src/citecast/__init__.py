"""Toolkit for predicting, from publication-time text alone, whether a
scholarly paper will end up among the most cited of its year.

The pipeline runs in stages, each usable on its own:

- :mod:`citecast.corpus` loads paper records and computes descriptive stats.
- :mod:`citecast.labeling` assigns per-year top-percentile citation labels.
- :mod:`citecast.prompting` assembles structured prompts per publication era.
- :mod:`citecast.backends` sends prompts to an LLM (or a seeded mock) and
  parses strict YES/NO verdicts with retry and cost accounting.
- :mod:`citecast.evaluation` scores predictions against labels and measures
  run-to-run agreement.
- :mod:`citecast.trends` extracts key phrases from predicted hits and groups
  them into research themes.
- :mod:`citecast.service` exposes single-paper prediction over HTTP.
- :mod:`citecast.cli` ties the stages together as subcommands.
"""

__version__ = "0.1.0"
