"""Cross-seed aggregation of evaluation reports.

Each evaluation run writes a JSON report containing a ``protocol`` name, a
``seed`` (null for deterministic models), and a flat-or-nested ``metrics``
object.  This module collects such reports from a run directory, groups
them by protocol, and emits mean and population standard deviation per
metric.  Population (not sample) standard deviation is the deliberate
choice: the seeds in a run ARE the population under summary, so a
single-seed run reports a standard deviation of exactly 0 rather than NaN.

Aggregate output is written as a JSON/CSV pair with identical content, and
regeneration over the same inputs is byte-identical (no timestamps).
"""

from __future__ import annotations

import json
import math
from pathlib import Path


class ReportError(ValueError):
    pass


def population_std(values) -> float:
    values = [float(v) for v in values]
    if not values:
        raise ReportError("population_std of no values")
    mean = sum(values) / len(values)
    return math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))


def aggregate(values) -> dict:
    values = [float(v) for v in values]
    if not values:
        raise ReportError("aggregate of no values")
    return {
        "mean": sum(values) / len(values),
        "stddev": population_std(values),
        "n": len(values),
    }


def flatten_metrics(metrics, prefix="") -> dict:
    """Nested dicts -> dotted keys; keeps only numeric leaves."""
    flat = {}
    for key, value in metrics.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten_metrics(value, dotted + "."))
        elif isinstance(value, bool):
            continue
        elif isinstance(value, (int, float)):
            flat[dotted] = float(value)
    return flat


def collect_reports(run_dir, protocol=None):
    """All JSON evaluation reports under ``run_dir`` (non-recursive).

    A file qualifies if it parses as JSON and carries ``protocol`` and
    ``metrics`` keys; aggregate outputs (which carry ``aggregated``) and
    unrelated JSON are skipped.  Returns a list of (path, report) pairs
    sorted by filename for deterministic downstream output.
    """
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise ReportError(f"run directory not found: {run_dir}")
    found = []
    for path in sorted(run_dir.glob("*.json")):
        try:
            blob = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            continue
        if not isinstance(blob, dict) or "metrics" not in blob or "protocol" not in blob:
            continue
        if blob.get("aggregated"):
            continue
        if protocol is not None and blob["protocol"] != protocol:
            continue
        found.append((path, blob))
    return found


def build_aggregate_report(reports, expected_seeds=None, allow_partial=False):
    """Group per-seed reports by protocol and aggregate each metric.

    ``reports`` is a list of (path, report) pairs.  Within one protocol a
    seed may appear once; a duplicate is an error (it would silently bias
    the mean).  When ``expected_seeds`` is given, any protocol missing one
    of them fails unless ``allow_partial``, in which case the gap is
    recorded in the payload instead.
    """
    by_protocol = {}
    for path, blob in reports:
        entry = by_protocol.setdefault(blob["protocol"], {"seeds": {}, "runs": []})
        seed = blob.get("seed")
        key = seed if seed is not None else f"file:{Path(path).name}"
        if key in entry["seeds"]:
            raise ReportError(
                f"duplicate seed {key!r} for protocol {blob['protocol']!r}: "
                f"{entry['seeds'][key]} and {path}"
            )
        entry["seeds"][key] = str(path)
        entry["runs"].append((key, flatten_metrics(blob["metrics"])))

    if not by_protocol:
        raise ReportError("no evaluation reports found to aggregate")

    payload = {"aggregated": True, "protocols": {}}
    for protocol in sorted(by_protocol):
        entry = by_protocol[protocol]
        missing = []
        if expected_seeds is not None:
            present = set(entry["seeds"])
            missing = sorted(s for s in expected_seeds if s not in present)
            if missing and not allow_partial:
                raise ReportError(
                    f"protocol {protocol!r} is missing seeds {missing}; "
                    "rerun them or pass --allow-partial"
                )
        metric_names = sorted({name for _, flat in entry["runs"] for name in flat})
        metrics = {}
        for name in metric_names:
            values = [flat[name] for _, flat in entry["runs"] if name in flat]
            metrics[name] = aggregate(values)
        block = {
            "seeds": {str(k): v for k, v in sorted(entry["seeds"].items(), key=lambda kv: str(kv[0]))},
            "metrics": metrics,
        }
        if missing:
            block["partial"] = True
            block["missing_seeds"] = missing
        payload["protocols"][protocol] = block
    return payload


_CSV_HEADER_COMMENT = "# aggregation: mean and population standard deviation across seeds"


def write_report_pair(base, payload, provenance=None) -> tuple:
    """Write ``base``.json and ``base``.csv with identical content.

    ``provenance`` (hashes of config, grammars, inputs) is embedded in the
    JSON and echoed as CSV comments, so every report names its inputs.
    """
    base = Path(base)
    blob = dict(payload)
    if provenance:
        blob["provenance"] = provenance
    json_path = Path(str(base) + ".json")
    csv_path = Path(str(base) + ".csv")
    json_path.write_text(
        json.dumps(blob, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    lines = [_CSV_HEADER_COMMENT]
    for key, value in sorted((provenance or {}).items()):
        if isinstance(value, dict):
            for sub, sval in sorted(value.items()):
                lines.append(f"# {key}.{sub}: {sval}")
        elif isinstance(value, (list, tuple)):
            lines.append(f"# {key}: " + ",".join(str(v) for v in value))
        else:
            lines.append(f"# {key}: {value}")
    if "protocols" in payload:
        lines.append("protocol,metric,n,mean,stddev")
        for protocol in sorted(payload["protocols"]):
            block = payload["protocols"][protocol]
            for name in sorted(block["metrics"]):
                agg = block["metrics"][name]
                lines.append(
                    f"{protocol},{name},{agg['n']},{agg['mean']:.6f},{agg['stddev']:.6f}"
                )
    else:
        lines.append("metric,value")
        for name, value in sorted(flatten_metrics(payload.get("metrics", {})).items()):
            lines.append(f"{name},{value:.6f}")
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return json_path, csv_path
