"""Command-line entry point: generate -> train -> eval, plus the ablation.

Every stage reads and writes files only, and every output is a pure function
of the config, the seeds and the input files, so reruns are byte-identical.

Exit codes: 0 success, 2 config error, 3 I/O error, 4 model/dataset mismatch.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, load_config
from .dataset import (
    Dataset,
    DatasetError,
    FeatureMode,
    build_dataset,
    feature_matrix,
    load_dataset,
    load_manifest,
    save_dataset,
)
from .evaluation import accuracy_csv, export_report, percentile_gap, cdf
from .neuralnet import ModelFormatError, MlpModel, TrainReport, accuracy, load_model, save_model
from .pipeline import (
    Method,
    SplitMismatchError,
    run_all_methods,
    stack_from_models,
    train_algorithm,
    train_config_from,
)
from .scene import build_scene

log = logging.getLogger("tandem_ru")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_MISMATCH = 0, 2, 3, 4
DATASET_FILE = "dataset.csv"


class MismatchError(Exception):
    pass


def _write_json(path: Path, body: dict) -> None:
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")


def _dataset_identity(path: Path) -> dict:
    m = load_manifest(path)
    return {"dataset_sha256": m["csv_sha256"], "config_hash": m["config_hash"], "dataset_seed": m["seed"]}


def _model_path(models_dir: Path, algo: int) -> Path:
    return models_dir / f"algo{algo}.json"


# ---------------------------------------------------------------------------
# commands


def cmd_generate(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config.dataset.seed = args.seed
    build_scene(config)  # raises ConfigError with the full violation list
    dataset = build_dataset(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mpath = save_dataset(dataset, out / DATASET_FILE)
    hist = Counter(s.best_ru for s in dataset.samples)
    print(f"samples: {len(dataset)}")
    print(f"train/val: {len(dataset.train_indices)}/{len(dataset.val_indices)}")
    print("best_ru histogram: " + " ".join(f"{r}:{hist.get(r, 0)}" for r in range(dataset.n_ru)))
    print(f"wrote {out / DATASET_FILE} and {mpath.name}")
    return EXIT_OK


def _algos(choice: str) -> list[int]:
    return [1, 2, 3] if choice == "all" else [int(choice)]


def cmd_train(args) -> int:
    path = Path(args.dataset)
    dataset = load_dataset(path)
    identity = _dataset_identity(path)
    cfg = train_config_from(dataset.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for algo in _algos(args.algo):
        model, report = train_algorithm(dataset, algo, cfg)
        model.metadata = {
            "algo": algo,
            **identity,
            "train_config": dataclasses.asdict(cfg),
            "best_epoch": report.best_epoch,
            "selection": report.selection,
        }
        save_model(model, _model_path(out, algo))
        (out / f"accuracy_algo{algo}.csv").write_text(accuracy_csv(report))
        _write_json(out / f"train_report_algo{algo}.json", report.to_dict())
        print(
            f"algo{algo}: best epoch {report.best_epoch}, "
            f"val accuracy {report.best_val_accuracy:.4f}, "
            f"train accuracy {report.train_accuracy[report.best_epoch]:.4f}"
        )
    return EXIT_OK


def _load_models(models_dir: Path, dataset_path: Path, dataset: Dataset) -> dict[int, MlpModel]:
    identity = _dataset_identity(dataset_path)
    models = {}
    for algo in (1, 2, 3):
        p = _model_path(models_dir, algo)
        if not p.exists():
            raise FileNotFoundError(f"model file for algorithm {algo} not found: {p}")
        model = load_model(p)
        sha = model.metadata.get("dataset_sha256")
        if sha != identity["dataset_sha256"]:
            raise MismatchError(f"algorithm {algo} model was trained on a different dataset ({sha})")
        if not model.trained:
            raise MismatchError(f"algorithm {algo} model is untrained")
        models[algo] = model
    return models


def _load_reports(models_dir: Path) -> dict[str, TrainReport]:
    reports = {}
    for algo in (1, 2, 3):
        p = models_dir / f"train_report_algo{algo}.json"
        if p.exists():
            reports[f"algo{algo}"] = TrainReport(**json.loads(p.read_text()))
    return reports


def cmd_eval(args) -> int:
    dpath, mdir = Path(args.dataset), Path(args.models)
    dataset = load_dataset(dpath)
    models = _load_models(mdir, dpath, dataset)
    try:
        stack = stack_from_models(models, dataset.config)
    except ValueError as exc:
        raise MismatchError(str(exc)) from exc
    results = run_all_methods(stack, dataset)
    manifest = {
        "version": __version__,
        **_dataset_identity(dpath),
        "train_seeds": {f"algo{a}": m.metadata.get("train_config", {}).get("seed") for a, m in models.items()},
        "n_val": len(dataset.val_indices),
    }
    export_report(args.out, results, _load_reports(mdir), manifest)
    cdfs = {m: cdf(r.achieved_snr_db) for m, r in results.items()}
    for m, r in results.items():
        print(f"{m.value}: mean SNR {np.mean(r.achieved_snr_db):.3f} dB, RU accuracy {r.accuracy:.4f}")
    gap = percentile_gap(cdfs[Method.THREE_STEP], cdfs[Method.ALGO3_ONLY], 0.10)
    print(f"p10 gap ThreeStep - Algo3Only: {gap:+.3f} dB")
    return EXIT_OK


def ambiguity_groups(dataset: Dataset) -> tuple[dict[bytes, set[int]], int]:
    """Labels seen per distinct low-band PDP, and how many PDPs carry two or more."""
    labels: dict[bytes, set[int]] = {}
    for s in dataset.samples:
        labels.setdefault(np.ascontiguousarray(s.zeta_low).tobytes(), set()).add(s.best_ru)
    return labels, sum(len(v) >= 2 for v in labels.values())


def cmd_ablate(args) -> int:
    dpath = Path(args.dataset)
    dataset = load_dataset(dpath)
    if args.models:
        algo3 = _load_models(Path(args.models), dpath, dataset)[3]
    else:
        algo3, _ = train_algorithm(dataset, 3, train_config_from(dataset.config, args.seed))
    labels, n_ambiguous_pdps = ambiguity_groups(dataset)
    val = dataset.val_indices
    ambiguous = [i for i in val if len(labels[dataset.samples[i].zeta_low.tobytes()]) >= 2]
    rest = [i for i in val if i not in set(ambiguous)]

    def acc(idx):
        if not idx:
            return float("nan")
        X, y = feature_matrix(dataset, FeatureMode.ALGO3, idx)
        return accuracy(algo3, X, y)

    rows = [("ambiguous", ambiguous), ("unambiguous", rest), ("all", val)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["subset,n_samples,algo3_accuracy"] + [f"{n},{len(i)},{acc(i)!r}" for n, i in rows]
    (out / "ablation.csv").write_text("\n".join(lines) + "\n")
    summary = {
        **_dataset_identity(dpath),
        "one_to_many_low_band_pdps": n_ambiguous_pdps,
        "distinct_low_band_pdps": len(labels),
        "ambiguous_val_samples": len(ambiguous),
        "algo3_accuracy": {n: acc(i) for n, i in rows},
    }
    _write_json(out / "ablation.json", summary)
    print(f"low-band PDPs mapping to >= 2 best RUs: {n_ambiguous_pdps} of {len(labels)}")
    print(f"validation samples with ambiguous low-band PDP: {len(ambiguous)} of {len(val)}")
    for n, i in rows:
        print(f"algo3 accuracy ({n}): {acc(i):.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tandem-ru", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="simulate channels and write the labelled dataset")
    g.add_argument("--config", help="JSON config file (defaults when omitted)")
    g.add_argument("--seed", type=int, help="dataset seed, overrides the config")
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train classifiers on the training split")
    t.add_argument("--dataset", required=True, help="dataset CSV written by generate")
    t.add_argument("--algo", choices=["1", "2", "3", "all"], default="all")
    t.add_argument("--seed", type=int, help="training seed, overrides the config")
    t.add_argument("--out", required=True, help="output directory for models and reports")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="run all selection methods on the validation split")
    e.add_argument("--dataset", required=True)
    e.add_argument("--models", required=True, help="directory holding algo1/2/3.json")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("ablate", help="quantify the one-to-many failure of low-band-only inference")
    a.add_argument("--dataset", required=True)
    a.add_argument("--models", help="reuse a trained algo3.json instead of training one")
    a.add_argument("--seed", type=int, help="training seed when no models are given")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_ablate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MismatchError, SplitMismatchError) as exc:
        print(f"mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (OSError, DatasetError, ModelFormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
