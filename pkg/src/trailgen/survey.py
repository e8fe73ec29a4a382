"""Survey aggregation: per-participant totals, winner counts, means, medians.

Each participant rates each (movie, method) trailer on Appropriateness,
Attractiveness, and Interest (Likert 1-7). A trailer's total score is the
sum of the three ratings; per participant and movie, the method(s) with the
highest total are credited as winners (ties credit all tied methods).
"""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

METRICS = ("appropriateness", "attractiveness", "interest")
CSV_COLUMNS = ("participant", "movie", "method", *METRICS)


@dataclass(frozen=True)
class SurveyRow:
    participant: str
    movie: str
    method: str
    appropriateness: int
    attractiveness: int
    interest: int

    @property
    def total(self) -> int:
        return self.appropriateness + self.attractiveness + self.interest


@dataclass(frozen=True)
class RejectedRow:
    line: int
    reason: str


@dataclass
class SurveyReport:
    totals: dict[tuple[str, str, str], int] = field(default_factory=dict)
    winner_counts: dict[str, dict[str, int]] = field(default_factory=dict)
    means: dict[str, dict[str, float]] = field(default_factory=dict)
    medians: dict[str, dict[str, float]] = field(default_factory=dict)
    rejected: list[RejectedRow] = field(default_factory=list)
    n_rows: int = 0

    def to_dict(self) -> dict:
        return {
            "n_rows": self.n_rows,
            "totals": [
                {"participant": p, "movie": mo, "method": me, "total": t}
                for (p, mo, me), t in sorted(self.totals.items())
            ],
            "winner_counts": self.winner_counts,
            "means": self.means,
            "medians": self.medians,
            "rejected": [{"line": r.line, "reason": r.reason} for r in self.rejected],
        }


def parse_rows(
    records: Iterable[dict], rejected: list[RejectedRow] | None = None
) -> list[SurveyRow]:
    """Validate raw records; out-of-range or malformed ratings reject the row."""
    rows: list[SurveyRow] = []
    rejected = rejected if rejected is not None else []
    for line_no, record in enumerate(records, start=1):
        try:
            ratings = {m: int(record[m]) for m in METRICS}
        except (KeyError, TypeError, ValueError) as exc:
            rejected.append(RejectedRow(line_no, f"bad rating value ({exc})"))
            continue
        bad = [m for m, v in ratings.items() if not 1 <= v <= 7]
        if bad:
            rejected.append(
                RejectedRow(line_no, f"rating out of range [1, 7]: {', '.join(bad)}")
            )
            continue
        if not all(str(record.get(k, "")).strip() for k in ("participant", "movie", "method")):
            rejected.append(RejectedRow(line_no, "missing participant/movie/method"))
            continue
        rows.append(
            SurveyRow(
                participant=str(record["participant"]).strip(),
                movie=str(record["movie"]).strip(),
                method=str(record["method"]).strip(),
                **ratings,
            )
        )
    return rows


def read_ratings_csv(path: Path | str) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def aggregate_survey(records: Iterable[dict]) -> SurveyReport:
    report = SurveyReport()
    rows = parse_rows(records, report.rejected)
    report.n_rows = len(rows)

    for row in rows:
        report.totals[(row.participant, row.movie, row.method)] = row.total

    # Winner per (participant, movie): every method tied at the max total.
    by_vote: dict[tuple[str, str], list[SurveyRow]] = {}
    for row in rows:
        by_vote.setdefault((row.participant, row.movie), []).append(row)
    for (_participant, movie), group in by_vote.items():
        best = max(r.total for r in group)
        for row in group:
            if row.total == best:
                movie_counts = report.winner_counts.setdefault(movie, {})
                movie_counts[row.method] = movie_counts.get(row.method, 0) + 1

    by_method: dict[str, list[SurveyRow]] = {}
    for row in rows:
        by_method.setdefault(row.method, []).append(row)
    for method, group in sorted(by_method.items()):
        report.means[method] = {
            m: float(statistics.mean(getattr(r, m) for r in group)) for m in METRICS
        }
        report.medians[method] = {
            m: float(statistics.median(getattr(r, m) for r in group)) for m in METRICS
        }
    return report
