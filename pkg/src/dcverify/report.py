"""Confidence bands, outcome histograms and run serialisation."""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from ._validation import bits_to_str

if TYPE_CHECKING:  # pragma: no cover
    from .estimate import FidelityEstimate, ShotRecord

SHOT_HEADER = ("k", "i", "j", "ip", "jp", "l", "o", "b", "z", "beta")


def hoeffding_band(T: int, confidence: float, range_width: float) -> float:
    """Half-width ``range_width * sqrt(ln(2/delta) / (2T))`` with ``delta = 1 - confidence``."""
    if int(T) < 1:
        raise ValueError("need at least one shot")
    delta = 1.0 - float(confidence)
    if not 0 < delta <= 1:
        raise ValueError("confidence must lie in [0, 1)")
    return float(range_width) * math.sqrt(math.log(2 / delta) / (2 * int(T)))


def weighted_hoeffding(sum_sq_ranges: float, delta: float) -> float:
    """Half-width for a sum of independent bounded terms with ``sum (b_i - a_i)^2`` given."""
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    return math.sqrt(sum_sq_ranges * math.log(2 / delta) / 2)


# -- histograms -----------------------------------------------------------------

def outcome_bin(b: int, z: Sequence[int], o: int) -> int:
    """Decimal code of the pattern b z_n ... z_1 o (b high, o low)."""
    zint = sum(bit << q for q, bit in enumerate(z))
    return (b << (len(z) + 1)) | (zint << 1) | o


def bin_pattern(code: int, n: int) -> str:
    return format(code, f"0{n + 2}b")


@dataclass
class HistogramTable:
    """Outcome counts for one (i, j, i', j', l) configuration, pooled over k.

    The split circuits do not depend on k (it only enters the classical
    post-processing), so pooling is exact.
    """

    n: int
    i: tuple
    j: tuple
    ip: tuple
    jp: tuple
    l: tuple
    counts: np.ndarray

    @property
    def key(self) -> tuple:
        return (self.i, self.j, self.ip, self.jp, self.l)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "i": bits_to_str(self.i),
            "j": bits_to_str(self.j),
            "ip": bits_to_str(self.ip),
            "jp": bits_to_str(self.jp),
            "l": bits_to_str(self.l),
            "counts": [int(c) for c in self.counts],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "HistogramTable":
        bits = lambda s: tuple(int(ch) for ch in s)  # noqa: E731
        return cls(doc["n"], bits(doc["i"]), bits(doc["j"]), bits(doc["ip"]), bits(doc["jp"]), bits(doc["l"]),
                   np.asarray(doc["counts"], dtype=np.int64))

    def alpha_frequency(self, k: Sequence[int]) -> int:
        """Number of shots with the parity condition met for ``k`` (alpha = +1)."""
        n = self.n
        c = (sum(a * b for a, b in zip(self.i, self.j)) + sum(a * b for a, b in zip(self.ip, self.jp))) % 2
        hits = 0
        for code, count in enumerate(self.counts):
            if not count:
                continue
            b = code >> (n + 1)
            z = [(code >> (q + 1)) & 1 for q in range(n)]
            if sum(zq * kq for zq, kq in zip(z, k)) % 2 == c ^ b:
                hits += int(count)
        return hits


def emit_histograms(records: Iterable["ShotRecord"]) -> list[HistogramTable]:
    """Group shot records by configuration and count outcome patterns."""
    tables: dict = {}
    n = None
    for rec in records:
        if n is None:
            n = len(rec.z)
        elif len(rec.z) != n:
            raise ValueError("shot records from different registers cannot share histograms")
        key = (rec.i, rec.j, rec.ip, rec.jp, rec.l)
        if key not in tables:
            tables[key] = HistogramTable(n, *key, np.zeros(2 ** (n + 2), dtype=np.int64))
        tables[key].counts[outcome_bin(rec.b, rec.z, rec.o)] += 1
    return [tables[key] for key in sorted(tables)]


def histogram(records: Iterable["ShotRecord"]) -> HistogramTable | None:
    """Counts for a record stream that must share one configuration."""
    tables = emit_histograms(records)
    if len(tables) > 1:
        raise ValueError("records mix several (i, j, i', j', l) configurations")
    return tables[0] if tables else None


def write_histograms_csv(tables: Sequence[HistogramTable], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "ip", "jp", "l", "bin", "pattern", "count"])
        for t in tables:
            for code, count in enumerate(t.counts):
                w.writerow([bits_to_str(t.i), bits_to_str(t.j), bits_to_str(t.ip), bits_to_str(t.jp),
                            bits_to_str(t.l), code, bin_pattern(code, t.n), int(count)])


def write_shots_csv(records: Iterable["ShotRecord"], path) -> int:
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SHOT_HEADER)
        for r in records:
            w.writerow([bits_to_str(r.k), bits_to_str(r.i), bits_to_str(r.j), bits_to_str(r.ip),
                        bits_to_str(r.jp), bits_to_str(r.l), r.o, r.b, bits_to_str(r.z), r.beta])
            n += 1
    return n


def read_shots_csv(path) -> list["ShotRecord"]:
    from .estimate import ShotRecord

    bits = lambda s: tuple(int(ch) for ch in s)  # noqa: E731
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SHOT_HEADER:
            raise ValueError("unexpected shot-log header")
        for row in reader:
            out.append(ShotRecord(bits(row["k"]), bits(row["i"]), bits(row["j"]), bits(row["ip"]),
                                  bits(row["jp"]), bits(row["l"]), int(row["o"]), int(row["b"]),
                                  bits(row["z"]), int(row["beta"])))
    return out


# -- run reports ------------------------------------------------------------------

@dataclass
class RunReport:
    estimate: "FidelityEstimate"
    oracle_value: float | None = None
    band: tuple[float, float] = (0.0, 1.0)
    histograms: list = field(default_factory=list)
    direct: dict | None = None

    @property
    def abs_error(self) -> float | None:
        if self.oracle_value is None:
            return None
        return abs(self.estimate.f_est - self.oracle_value)

    def to_dict(self) -> dict:
        e = self.estimate
        return {
            "f_est": e.f_est,
            "mode": e.mode,
            "t1": e.t1,
            "t2": e.t2,
            "t3": e.t3,
            "epsilon": e.config.get("epsilon"),
            "delta": e.config.get("delta"),
            "denseness": e.denseness,
            "m": e.m,
            "n": e.n,
            "seed": e.seed,
            "shots_total": e.shots_used,
            "oracle_fidelity": self.oracle_value,
            "abs_error": self.abs_error,
            "out_of_range": e.out_of_range,
            "reduced": e.reduced,
            "hoeffding_band": {"half_width": self.band[0], "confidence": self.band[1]},
            "partial_sums": [list(p) for p in e.partial],
            "wall_time": e.wall_time,
            "config": e.config,
            "direct": self.direct,
            "histograms": [t.to_dict() for t in self.histograms],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunReport":
        from .estimate import FidelityEstimate

        est = FidelityEstimate(
            f_est=doc["f_est"], shots_used=doc["shots_total"], mode=doc["mode"], t1=doc["t1"], t2=doc["t2"],
            t3=doc["t3"], denseness=doc["denseness"], m=doc["m"], n=doc["n"], seed=doc["seed"],
            reduced=doc["reduced"], hoeffding_half_width=doc["hoeffding_band"]["half_width"],
            config=doc["config"], partial=[list(p) for p in doc["partial_sums"]], wall_time=doc["wall_time"],
        )
        band = (doc["hoeffding_band"]["half_width"], doc["hoeffding_band"]["confidence"])
        tables = [HistogramTable.from_dict(t) for t in doc.get("histograms", [])]
        return cls(est, doc.get("oracle_fidelity"), band, tables, doc.get("direct"))

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))


def make_report(estimate: "FidelityEstimate", oracle_value: float | None = None, direct: dict | None = None
                ) -> RunReport:
    confidence = 1 - estimate.config.get("delta", 0.05)
    return RunReport(estimate, oracle_value, (estimate.hoeffding_half_width, confidence),
                     emit_histograms(estimate.records()), direct)


def write_run(report: RunReport, out_dir, run_name: str) -> dict[str, str]:
    """Write ``<run>.report.json``, ``<run>.hist.csv`` and ``<run>.shots.csv``."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "report": os.path.join(out_dir, f"{run_name}.report.json"),
        "hist": os.path.join(out_dir, f"{run_name}.hist.csv"),
        "shots": os.path.join(out_dir, f"{run_name}.shots.csv"),
    }
    with open(paths["report"], "w", encoding="utf-8") as fh:
        fh.write(report.to_json() + "\n")
    write_histograms_csv(report.histograms, paths["hist"])
    write_shots_csv(report.estimate.records(), paths["shots"])
    return paths


def format_table(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    cells = [[str(h) for h in header]] + [[_fmt(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)
