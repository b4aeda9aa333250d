"""flowlens: metadata-only network flow analytics for AI-tool usage studies."""

__version__ = "0.1.0"

from flowlens.ingest import FlowLog, FlowRecord, parse_flow_log, validate_record
from flowlens.catalog import Catalog, ExclusionPolicy, Tool, apply_policy
from flowlens.sessions import GapThreshold, Session, sessionize

__all__ = [
    "FlowLog",
    "FlowRecord",
    "parse_flow_log",
    "validate_record",
    "Catalog",
    "ExclusionPolicy",
    "Tool",
    "apply_policy",
    "GapThreshold",
    "Session",
    "sessionize",
]
