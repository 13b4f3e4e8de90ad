"""SNR CDFs, percentile gaps, per-sample SNR differences and report export.

Every float is written with repr() so the CSVs re-parse to the exact values,
and nothing time-dependent is written, so identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .neuralnet import TrainReport
from .pipeline import Method, MethodResult

PERCENTILES = (0.05, 0.10, 0.25, 0.50)
GAP_PAIRS = (
    (Method.THREE_STEP, Method.ALGO3_ONLY),
    (Method.ALGO2_TRUE_IBBC, Method.THREE_STEP),
    (Method.EXHAUSTIVE, Method.ALGO2_TRUE_IBBC),
    (Method.EXHAUSTIVE, Method.THREE_STEP),
)


@dataclass(frozen=True)
class EmpiricalCdf:
    values: np.ndarray  # distinct sample values, ascending
    probs: np.ndarray  # P(X <= values[i]), strictly increasing, last entry 1

    def __call__(self, x) -> np.ndarray | float:
        k = np.searchsorted(self.values, x, side="right")
        out = np.where(k > 0, self.probs[np.maximum(k - 1, 0)], 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def quantile(self, p: float) -> float:
        """Lower-step inverse: the smallest value v with F(v) >= p."""
        if not 0 < p <= 1:
            raise ValueError("p must lie in (0, 1]")
        # tolerance absorbs the k/n rounding so F(v) = p hits exactly
        k = int(np.searchsorted(self.probs, p - 1e-12, side="left"))
        return float(self.values[min(k, len(self.values) - 1)])


def cdf(values) -> EmpiricalCdf:
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("cannot build a CDF from no values")
    if np.any(np.isnan(v)):
        raise ValueError("CDF input contains NaN")
    uniq, counts = np.unique(v, return_counts=True)
    probs = np.cumsum(counts) / v.size
    probs[-1] = 1.0
    return EmpiricalCdf(uniq, probs)


def percentile_gap(cdf_a: EmpiricalCdf, cdf_b: EmpiricalCdf, p: float) -> float:
    """Horizontal distance between two CDFs at probability p, a minus b, in dB."""
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    return cdf_a.quantile(p) - cdf_b.quantile(p)


def _aligned(a: MethodResult, b: MethodResult) -> None:
    if list(a.sample_indices) != list(b.sample_indices):
        raise ValueError(f"{a.method.value} and {b.method.value} cover different samples")


def snr_difference(a: MethodResult, b: MethodResult) -> np.ndarray:
    _aligned(a, b)
    return np.asarray(a.achieved_snr_db) - np.asarray(b.achieved_snr_db)


@dataclass(frozen=True)
class DifferenceTable:
    sample_indices: list[int]
    three_step_vs_algo3: np.ndarray  # ThreeStep - Algo3Only
    algo2_true_vs_three_step: np.ndarray  # Algo2TrueIbbc - ThreeStep


def snr_difference_table(results: dict[Method, MethodResult]) -> DifferenceTable:
    ts, a3, a2 = (results[m] for m in (Method.THREE_STEP, Method.ALGO3_ONLY, Method.ALGO2_TRUE_IBBC))
    return DifferenceTable(list(ts.sample_indices), snr_difference(ts, a3), snr_difference(a2, ts))


# ---------------------------------------------------------------------------
# CSV writers


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _f(x: float) -> str:
    return repr(float(x))


def cdf_csv(c: EmpiricalCdf) -> str:
    return _csv(([_f(v), _f(p)] for v, p in zip(c.values, c.probs)), ["snr_db", "cdf"])


def gaps_csv(cdfs: dict[Method, EmpiricalCdf], percentiles=PERCENTILES) -> str:
    rows = [
        [a.value, b.value, _f(p), _f(percentile_gap(cdfs[a], cdfs[b], p))]
        for a, b in GAP_PAIRS
        for p in percentiles
    ]
    return _csv(rows, ["method_a", "method_b", "percentile", "gap_db"])


def differences_csv(table: DifferenceTable) -> str:
    rows = (
        [i, _f(d1), _f(d2)]
        for i, d1, d2 in zip(table.sample_indices, table.three_step_vs_algo3, table.algo2_true_vs_three_step)
    )
    return _csv(rows, ["sample_index", "three_step_minus_algo3", "algo2_true_minus_three_step"])


def accuracy_csv(report: TrainReport) -> str:
    rows = (
        [e, _f(l), _f(ta), _f(va)]
        for e, (l, ta, va) in enumerate(zip(report.train_loss, report.train_accuracy, report.val_accuracy))
    )
    return _csv(rows, ["epoch", "train_loss", "train_accuracy", "val_accuracy"])


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def export_report(
    out_dir: str | Path,
    results: dict[Method, MethodResult],
    reports: dict[str, TrainReport] | None = None,
    manifest: dict | None = None,
) -> dict[str, Path]:
    """Write every evaluation artefact into out_dir, overwriting earlier output."""
    from .pipeline import method_results_csv

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: dict[str, str] = {}
    cdfs = {m: cdf(r.achieved_snr_db) for m, r in results.items()}
    for m, c in cdfs.items():
        files[f"cdf_{m.value}.csv"] = cdf_csv(c)
    files["gaps.csv"] = gaps_csv(cdfs)
    files["differences.csv"] = differences_csv(snr_difference_table(results))
    files["method_results.csv"] = method_results_csv(results)
    for algo, rep in sorted((reports or {}).items()):
        files[f"accuracy_{algo}.csv"] = accuracy_csv(rep)

    written = {}
    for name, text in files.items():
        path = out / name
        path.write_text(text)
        written[name] = path
    body = dict(manifest or {})
    body["files"] = sorted([*files, "manifest.json"])
    body["accuracy"] = {m.value: r.accuracy for m, r in results.items()}
    body["p10_gap_three_step_vs_algo3_db"] = percentile_gap(
        cdfs[Method.THREE_STEP], cdfs[Method.ALGO3_ONLY], 0.10
    )
    (out / "manifest.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    written["manifest.json"] = out / "manifest.json"
    return written
