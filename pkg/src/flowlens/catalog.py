"""AI-tool domain catalog: hostname classification and exclusion policies.

Matching is suffix-based on label boundaries, so `chatgpt.com` matches
`ws.chatgpt.com` but never `notchatgpt.com`. An exact rule always beats a
suffix rule; among suffix rules the longest pattern wins.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Optional

# Canonical tool ids. "Other" tools are free-form lowercase names.
CHATGPT = "chatgpt"
CLAUDE = "claude"
COPILOT = "copilot"
DEEPSEEK = "deepseek"
GEMINI = "gemini"
GROK = "grok"
PERPLEXITY = "perplexity"

KNOWN_TOOLS = (CHATGPT, CLAUDE, COPILOT, DEEPSEEK, GEMINI, GROK, PERPLEXITY)

DISPLAY_NAMES = {
    CHATGPT: "ChatGPT",
    CLAUDE: "Claude",
    COPILOT: "Copilot",
    DEEPSEEK: "DeepSeek",
    GEMINI: "Gemini",
    GROK: "Grok",
    PERPLEXITY: "Perplexity",
}

Tool = str  # tool id; one of KNOWN_TOOLS or a lowercase "other" name

DEFAULT_CATALOG_PATH = Path(__file__).parent / "data" / "default_catalog.csv"
GOOGLE_SEARCH_PATTERN = "google.com"


class CatalogError(ValueError):
    pass


class MalformedReport(ValueError):
    pass


@dataclass(frozen=True)
class DomainRule:
    pattern: str  # lowercase hostname or suffix fragment
    tool: Tool
    match_kind: str = "suffix"  # "exact" or "suffix"

    def __post_init__(self):
        if self.match_kind not in ("exact", "suffix"):
            raise CatalogError(f"bad match_kind: {self.match_kind}")
        p = self.pattern
        if not p or p != p.lower() or any(ch.isspace() for ch in p):
            raise CatalogError(f"bad pattern: {self.pattern!r}")


@dataclass(frozen=True)
class ExclusionPolicy:
    """Tools removed from aggregate totals or from analysis entirely.

    Gemini stays out of totals because google.com traffic double-counts
    search; Grok is dropped outright (no observed traffic in the study).
    """

    exclude_from_totals: frozenset = frozenset({GEMINI})
    drop_entirely: frozenset = frozenset({GROK})

    def __post_init__(self):
        overlap = self.exclude_from_totals & self.drop_entirely
        if overlap:
            raise CatalogError(f"policy sets overlap: {sorted(overlap)}")

    def counted(self, tool: Tool) -> bool:
        return tool not in self.exclude_from_totals and tool not in self.drop_entirely


class Catalog:
    """Immutable rule set; classification is safe for concurrent reads."""

    def __init__(self, rules: Iterable[DomainRule]):
        self._exact: dict[str, Tool] = {}
        self._suffix: dict[str, Tool] = {}
        for rule in rules:
            table = self._exact if rule.match_kind == "exact" else self._suffix
            existing = table.get(rule.pattern)
            if existing is not None and existing != rule.tool:
                raise CatalogError(
                    f"conflicting rules for {rule.pattern!r} ({rule.match_kind}): "
                    f"{existing} vs {rule.tool}")
            table[rule.pattern] = rule.tool

    @property
    def rules(self) -> list[DomainRule]:
        out = [DomainRule(p, t, "exact") for p, t in sorted(self._exact.items())]
        out += [DomainRule(p, t, "suffix") for p, t in sorted(self._suffix.items())]
        return out

    def classify(self, hostname: str) -> Optional[Tool]:
        """Map a lowercase hostname to a tool id, or None if unlisted.

        Exact match wins over any suffix match; otherwise the longest
        matching suffix (checked on dot boundaries) wins.
        """
        tool = self._exact.get(hostname)
        if tool is not None:
            return tool
        # Walk label boundaries from the most specific suffix outward.
        candidate = hostname
        while True:
            tool = self._suffix.get(candidate)
            if tool is not None:
                return tool
            dot = candidate.find(".")
            if dot < 0:
                return None
            candidate = candidate[dot + 1:]


def load_catalog(path=DEFAULT_CATALOG_PATH, gemini_via_google: bool = True) -> Catalog:
    """Load a `pattern,match_kind,tool` CSV catalog file.

    gemini_via_google adds a google.com→Gemini suffix rule, mirroring the
    treatment of AI summaries embedded in search results. Warning: this
    inflates Gemini counts relative to standalone tools, which is why
    Gemini is excluded from totals by the default policy.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"catalog file not found: {path}")
    rules = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise CatalogError(f"{path}:{line_no}: expected pattern,kind,tool")
            pattern, kind, tool = (p.strip() for p in parts)
            rules.append(DomainRule(pattern, tool, kind))
    if gemini_via_google:
        rules.append(DomainRule(GOOGLE_SEARCH_PATTERN, GEMINI, "suffix"))
    return Catalog(rules)


def apply_policy(counts: dict[Tool, int], policy: ExclusionPolicy = ExclusionPolicy()) -> int:
    """Policy-adjusted total across tools; per-tool counts stay reported as-is."""
    for tool, n in counts.items():
        if n < 0:
            raise ValueError(f"negative count for {tool}: {n}")
    return sum(n for tool, n in counts.items() if policy.counted(tool))


# --- App Privacy Report import -------------------------------------------

APR_DOMAIN_KEYS = ("domain", "contactedDomain", "contacted_domain", "hostname")
APR_APP_KEYS = ("app", "appLabel", "app_label", "bundleId", "bundle_id")


def import_apr(report: BinaryIO | Iterable[bytes]) -> tuple[set[tuple[str, str]], list[str]]:
    """Extract (domain, app_label) candidate pairs from an APR NDJSON export.

    Candidates never enter a live catalog automatically; mapping an app
    label to a tool happens through a reviewed mapping file.
    Returns (candidates, diagnostics).
    """
    candidates: set[tuple[str, str]] = set()
    diagnostics: list[str] = []
    saw_object = False
    for line_no, raw in enumerate(report, start=1):
        line = raw.decode("utf-8").strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedReport(f"line {line_no}: {exc}") from exc
        if not isinstance(obj, dict):
            raise MalformedReport(f"line {line_no}: expected a JSON object")
        saw_object = True
        domain = next((obj[k] for k in APR_DOMAIN_KEYS if obj.get(k)), None)
        if domain is None:
            diagnostics.append(f"line {line_no}: no domain field, skipped")
            continue
        app = next((obj[k] for k in APR_APP_KEYS if obj.get(k)), "")
        candidates.add((str(domain).lower().rstrip("."), str(app)))
    return candidates, diagnostics


def load_apr_mapping(path) -> dict[str, Tool]:
    """Load the reviewed `app_label,tool` mapping file."""
    mapping: dict[str, Tool] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise CatalogError(f"{path}:{line_no}: expected app_label,tool")
            mapping[parts[0].strip()] = parts[1].strip().lower()
    return mapping


def rules_from_candidates(candidates: set[tuple[str, str]],
                          mapping: dict[str, Tool]) -> list[DomainRule]:
    """Turn reviewed APR candidates into suffix rules; unmapped labels are skipped."""
    rules = []
    for domain, app in sorted(candidates):
        tool = mapping.get(app)
        if tool is not None:
            rules.append(DomainRule(domain, tool, "suffix"))
    return rules
