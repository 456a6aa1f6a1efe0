"""Region-level scientometric indicators from publication records.

Full counting attributes a co-authored publication once to every region on
it. FWCI is the mean ratio of citations to the expected field baseline;
quartile shares are percentages of a region-year's output in first-quartile
and in unranked sources. Thematic profiles are subject-area incidence
shares and feed the proximity weights.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyCell,
    EmptyRegion,
    MissingColumn,
    MissingData,
    NonNumericCell,
    UnknownSubjectArea,
)

QUARTILES = ("Q1", "Q2", "Q3", "Q4", "NONE")

# best-rank-wins order when a journal sits in several categories
_QUARTILE_RANK = {"Q1": 1, "Q2": 2, "Q3": 3, "Q4": 4, "NONE": 5}


@dataclass(frozen=True)
class PublicationRecord:
    id: str
    year: int
    regions: frozenset[str]
    subject_areas: frozenset[str]
    citations: int
    expected_citations: float
    journal_quartile: str

    def __post_init__(self):
        if not self.regions:
            raise ValueError(f"record {self.id!r}: regions must be nonempty")
        if not self.subject_areas:
            raise ValueError(f"record {self.id!r}: subject_areas must be nonempty")
        if self.citations < 0:
            raise ValueError(f"record {self.id!r}: citations must be >= 0")
        if self.expected_citations <= 0:
            raise ValueError(f"record {self.id!r}: expected_citations must be > 0")
        if self.journal_quartile not in QUARTILES:
            raise ValueError(
                f"record {self.id!r}: journal_quartile {self.journal_quartile!r} "
                f"not in {QUARTILES}"
            )


@dataclass(frozen=True)
class RegionYearIndicators:
    region: str
    year: int
    pub_count: int
    fwci: float
    q1_share: float  # percent, 0-100
    nq_share: float  # percent, 0-100


def best_quartile(quartiles) -> str:
    """Best (lowest-numbered) quartile across a journal's categories."""
    ranked = [q for q in quartiles if q in _QUARTILE_RANK]
    if not ranked:
        raise ValueError(f"no valid quartile among {list(quartiles)!r}")
    return min(ranked, key=_QUARTILE_RANK.__getitem__)


def attribute_full_counting(
    pubs: list[PublicationRecord],
) -> dict[tuple[str, int], list[PublicationRecord]]:
    """Group records by (region, year); each record counted once per region."""
    cells: dict[tuple[str, int], list[PublicationRecord]] = {}
    for rec in pubs:
        for region in sorted(rec.regions):
            cells.setdefault((region, rec.year), []).append(rec)
    return cells


def compute_fwci(records: list[PublicationRecord]) -> float:
    """Mean of citations / expected_citations over the cell's records."""
    if not records:
        raise EmptyCell("FWCI undefined for a region-year with no publications")
    ratios = [rec.citations / rec.expected_citations for rec in records]
    return float(np.mean(ratios))


def compute_quartile_shares(records: list[PublicationRecord]) -> tuple[float, float]:
    """(q1_share, nq_share) in percent of the cell's records."""
    if not records:
        raise EmptyCell("quartile shares undefined for a region-year with no publications")
    total = len(records)
    n_q1 = sum(1 for rec in records if rec.journal_quartile == "Q1")
    n_nq = sum(1 for rec in records if rec.journal_quartile == "NONE")
    return 100.0 * n_q1 / total, 100.0 * n_nq / total


def compute_thematic_profile(
    records: list[PublicationRecord], vocabulary: list[str]
) -> np.ndarray:
    """Subject-area incidence shares over a fixed vocabulary.

    A record listing k subject areas contributes one incidence to each of
    them; shares are incidences divided by total incidences and sum to 1.
    """
    if not records:
        raise EmptyRegion("thematic profile undefined for a region with no publications")
    index = {code: j for j, code in enumerate(vocabulary)}
    counts = np.zeros(len(vocabulary))
    for rec in records:
        for code in rec.subject_areas:
            if code not in index:
                raise UnknownSubjectArea(
                    f"record {rec.id!r}: subject area {code!r} not in vocabulary"
                )
            counts[index[code]] += 1
    return counts / counts.sum()


def region_year_indicators(
    pubs: list[PublicationRecord],
) -> list[RegionYearIndicators]:
    """All region-year indicator rows derivable from the records."""
    cells = attribute_full_counting(pubs)
    rows = []
    for (region, year), records in sorted(cells.items()):
        q1, nq = compute_quartile_shares(records)
        rows.append(
            RegionYearIndicators(
                region=region,
                year=year,
                pub_count=len(records),
                fwci=compute_fwci(records),
                q1_share=q1,
                nq_share=nq,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# i/o
# ---------------------------------------------------------------------------

_FIELDS = (
    "id",
    "year",
    "regions",
    "subject_areas",
    "citations",
    "expected_citations",
    "journal_quartile",
)


def _record_from_mapping(obj: dict, where: str) -> PublicationRecord:
    missing = [f for f in _FIELDS if f not in obj]
    if missing:
        raise MissingColumn(f"{where}: publication record missing fields {missing}")
    regions = obj["regions"]
    areas = obj["subject_areas"]
    if isinstance(regions, str):
        regions = [r for r in regions.split(";") if r]
    if isinstance(areas, str):
        areas = [a for a in areas.split(";") if a]
    try:
        return PublicationRecord(
            id=str(obj["id"]),
            year=int(obj["year"]),
            regions=frozenset(regions),
            subject_areas=frozenset(areas),
            citations=int(obj["citations"]),
            expected_citations=float(obj["expected_citations"]),
            journal_quartile=str(obj["journal_quartile"]).strip() or "NONE",
        )
    except (TypeError, ValueError) as exc:
        raise NonNumericCell(f"{where}: {exc}") from None


def load_publications(path) -> list[PublicationRecord]:
    """Read publication records from JSON-lines (.jsonl) or CSV.

    CSV multi-valued cells (regions, subject_areas) are semicolon-separated.
    """
    path = str(path)
    records: list[PublicationRecord] = []
    if path.endswith(".jsonl") or path.endswith(".json"):
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise NonNumericCell(f"{path}:{lineno}: bad JSON: {exc}") from None
                records.append(_record_from_mapping(obj, f"{path}:{lineno}"))
    else:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise MissingData(f"{path}: file is empty")
            for lineno, row in enumerate(reader, start=2):
                records.append(_record_from_mapping(row, f"{path}:{lineno}"))
    if not records:
        raise MissingData(f"{path}: no publication records")
    return records


def load_vocabulary(path) -> list[str]:
    """Subject-area vocabulary: one code per line, order preserved."""
    with open(path, "r", encoding="utf-8") as fh:
        codes = [line.strip() for line in fh if line.strip()]
    if not codes:
        raise MissingData(f"{path}: empty vocabulary")
    if len(set(codes)) != len(codes):
        raise NonNumericCell(f"{path}: duplicate subject-area codes")
    return codes


def write_indicator_csv(rows: list[RegionYearIndicators], path) -> None:
    """CSV compatible with panel ingestion (region,year,PUBS,FWCI,Q1SH,NQSH)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["region", "year", "PUBS", "FWCI", "Q1SH", "NQSH"])
        for r in rows:
            writer.writerow(
                [r.region, r.year, r.pub_count, repr(r.fwci), repr(r.q1_share), repr(r.nq_share)]
            )
