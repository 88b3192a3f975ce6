"""Per-segment error statistics in the layout of the hover and forward-flight tables."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class SegmentSummary:
    label: str
    t_start: float
    t_end: float
    n_samples: int
    # mean |ref - est| per axis over the steady window
    abs_error: tuple[float, float, float]
    # mean signed (est - ref) per axis over the steady window
    offset: tuple[float, float, float]
    # euclidean distance statistics over the whole segment
    eucl_mu: float
    eucl_sigma: float


def segments(labels) -> list[tuple[str, int, int]]:
    """Maximal runs of equal labels as ``(label, start, stop)`` index ranges."""
    out = []
    start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[start]:
            out.append((labels[start], start, i))
            start = i
    return out


def summarize(result, steady_fraction: float = 0.5, min_samples: int = 10) -> list[SegmentSummary]:
    """Error statistics per flight segment.

    Segments shorter than ``min_samples`` are skipped with a warning.
    """
    if len(result.t) == 0:
        raise ValueError("empty result")
    err = result.est_pos - result.ref_pos
    out = []
    for label, a, b in segments(result.labels):
        if b - a < min_samples:
            log.warning("segment %s at t=%.3f has %d samples; skipped", label, result.t[a], b - a)
            continue
        s = b - int(round((b - a) * steady_fraction))
        steady = err[s:b]
        dist = np.linalg.norm(err[a:b], axis=1)
        out.append(
            SegmentSummary(
                label=label,
                t_start=float(result.t[a]),
                t_end=float(result.t[b - 1]),
                n_samples=b - a,
                abs_error=tuple(float(v) for v in np.mean(np.abs(steady), axis=0)),
                offset=tuple(float(v) for v in np.mean(steady, axis=0)),
                eucl_mu=float(np.mean(dist)),
                eucl_sigma=float(np.std(dist)),
            )
        )
    return out


def summary_dict(name: str, segs: list[SegmentSummary]) -> dict:
    transitions = [
        {
            "start": prev.label,
            "final": cur.label,
            "abs_error_x": cur.abs_error[0],
            "abs_error_y": cur.abs_error[1],
            "abs_error_z": cur.abs_error[2],
        }
        for prev, cur in zip(segs, segs[1:])
    ]
    return {
        "scenario": name,
        "segments": [asdict(s) for s in segs],
        "transitions": transitions,
        "euclidean": {s.label: {"mu": s.eucl_mu, "sigma": s.eucl_sigma} for s in segs},
    }


def format_transition_table(rows: list[tuple[str, SegmentSummary, SegmentSummary]]) -> str:
    """Position errors in the final configuration of each transition."""
    lines = [
        f"{'scenario':<22} {'start':<10} {'final':<10} {'|x_r-x_e|':>10} {'|y_r-y_e|':>10} {'|z_r-z_e|':>10}",
    ]
    for name, prev, cur in rows:
        ex, ey, ez = cur.abs_error
        lines.append(f"{name:<22} {prev.label:<10} {cur.label:<10} {ex:>10.4f} {ey:>10.4f} {ez:>10.4f}")
    return "\n".join(lines)


def format_euclidean_table(rows: list[tuple[str, list[SegmentSummary]]]) -> str:
    """Euclidean tracking error (mean, std) per morphology segment."""
    lines = [f"{'scenario':<22} {'segment':<12} {'mu':>8} {'sigma':>8}"]
    for name, segs in rows:
        for s in segs:
            lines.append(f"{name:<22} {s.label:<12} {s.eucl_mu:>8.4f} {s.eucl_sigma:>8.4f}")
    return "\n".join(lines)
