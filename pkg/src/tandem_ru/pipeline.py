"""RU selection methods: the three classifiers, the 3-step refinement and baselines.

Step 1 of the refinement picks a coarse RU from the low-band PDP alone. Step 2
infers the IBBC from the low-band PDP plus the high-band PDP measured to that
coarse RU. Step 3 picks the final RU from the low-band PDP and the inferred
IBBC. Achieved SNRs are always read from the stored per-RU oracle SNRs.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .arrays import IbbcClass
from .config import ExperimentConfig
from .dataset import Dataset, FeatureMode, Sample, feature_matrix, normalize_pdp, one_hot
from .neuralnet import MlpModel, TrainConfig, TrainReport, init_model, train

ALGO_MODES = {1: FeatureMode.ALGO1, 2: FeatureMode.ALGO2_TRUE_IBBC, 3: FeatureMode.ALGO3}


class UntrainedModelError(RuntimeError):
    pass


class SplitMismatchError(ValueError):
    pass


class Classifier(Protocol):
    """Anything with class probabilities; MlpModel and the genie stubs both qualify."""

    trained: bool

    @property
    def in_dim(self) -> int: ...

    @property
    def n_classes(self) -> int: ...

    def predict_proba(self, x) -> np.ndarray: ...


class Method(enum.Enum):
    EXHAUSTIVE = "Exhaustive"
    ALGO2_TRUE_IBBC = "Algo2TrueIbbc"
    THREE_STEP = "ThreeStep"
    ALGO3_ONLY = "Algo3Only"


@dataclass(frozen=True)
class InferenceStack:
    algo1: Classifier  # low ++ high PDP -> IBBC
    algo2: Classifier  # low PDP ++ one-hot IBBC -> RU
    algo3: Classifier  # low PDP -> RU
    ibbcs: tuple[IbbcClass, ...]
    floor_db: float = -160.0
    ceil_db: float = -40.0

    def __post_init__(self):
        n_ibbc = len(self.ibbcs)
        if self.algo1.n_classes != n_ibbc:
            raise ValueError(f"algo1 has {self.algo1.n_classes} classes, expected {n_ibbc} IBBCs")
        if self.algo2.n_classes != self.algo3.n_classes:
            raise ValueError("algo2 and algo3 disagree on the number of RUs")
        n_low = self.algo3.in_dim
        if self.algo2.in_dim != n_low + n_ibbc:
            raise ValueError(f"algo2 expects {self.algo2.in_dim} features, not {n_low} + {n_ibbc}")
        if self.algo1.in_dim <= n_low:
            raise ValueError("algo1 input must hold the low-band and a high-band PDP")

    def features(self, pdp) -> np.ndarray:
        return normalize_pdp(pdp, self.floor_db, self.ceil_db)


def _argmax(model: Classifier, x: np.ndarray, name: str) -> int:
    if not getattr(model, "trained", False):
        raise UntrainedModelError(f"{name} has not been trained")
    p = np.asarray(model.predict_proba(x), dtype=float)
    return int(np.argmax(p))  # first maximum, i.e. lowest index on ties


def algo3_infer(stack: InferenceStack, zeta_low) -> int:
    return _argmax(stack.algo3, stack.features(zeta_low), "algo3")


def algo2_infer(stack: InferenceStack, zeta_low, ibbc: IbbcClass | int) -> int:
    k = ibbc if isinstance(ibbc, int) else ibbc.index
    x = np.concatenate([stack.features(zeta_low), one_hot(k, len(stack.ibbcs))])
    return _argmax(stack.algo2, x, "algo2")


def algo1_infer(stack: InferenceStack, zeta_low, zeta_high) -> IbbcClass:
    x = np.concatenate([stack.features(zeta_low), stack.features(zeta_high)])
    return stack.ibbcs[_argmax(stack.algo1, x, "algo1")]


@dataclass(frozen=True)
class ThreeStepTrace:
    coarse_ru: int
    ibbc: IbbcClass
    ru: int


def three_step_trace(stack: InferenceStack, sample: Sample) -> ThreeStepTrace:
    for name in ("algo1", "algo2", "algo3"):
        if not getattr(getattr(stack, name), "trained", False):
            raise UntrainedModelError(f"{name} has not been trained")
    r0 = algo3_infer(stack, sample.zeta_low)
    beta = algo1_infer(stack, sample.zeta_low, sample.zeta_high_per_ru[r0])
    return ThreeStepTrace(r0, beta, algo2_infer(stack, sample.zeta_low, beta))


def three_step_infer(stack: InferenceStack, sample: Sample) -> int:
    """Coarse RU, then IBBC from the coarse RU's high-band PDP, then the refined RU."""
    return three_step_trace(stack, sample).ru


# ---------------------------------------------------------------------------
# evaluation over the validation split


@dataclass
class MethodResult:
    method: Method
    sample_indices: list[int]
    chosen_ru: list[int]
    achieved_snr_db: np.ndarray
    best_ru: list[int]
    best_snr_db: np.ndarray = field(repr=False)

    @property
    def snr_gap_db(self) -> np.ndarray:
        """Shortfall against the exhaustive choice, >= 0."""
        return self.best_snr_db - self.achieved_snr_db

    @property
    def accuracy(self) -> float:
        return float(np.mean(np.array(self.chosen_ru) == np.array(self.best_ru)))


def _check_split(dataset: Dataset, indices) -> list[int]:
    n = len(dataset.samples)
    idx = list(dataset.val_indices if indices is None else indices)
    if not idx:
        raise SplitMismatchError("empty evaluation split")
    if min(idx) < 0 or max(idx) >= n:
        raise SplitMismatchError(f"split index out of range for {n} samples")
    if len(set(idx)) != len(idx):
        raise SplitMismatchError("split contains duplicate indices")
    if indices is None:
        train_set = set(dataset.train_indices)
        if train_set & set(idx) or len(train_set) + len(idx) != n:
            raise SplitMismatchError("train/val indices do not partition the dataset")
    return idx


def _result(method: Method, dataset: Dataset, idx: list[int], chosen: list[int]) -> MethodResult:
    samples = [dataset.samples[i] for i in idx]
    achieved = np.array([s.snr_per_ru_db[r] for s, r in zip(samples, chosen)])
    best = np.array([s.snr_per_ru_db[s.best_ru] for s in samples])
    return MethodResult(method, idx, list(chosen), achieved, [s.best_ru for s in samples], best)


def run_all_methods(stack: InferenceStack, dataset: Dataset, indices=None) -> dict[Method, MethodResult]:
    """Evaluate every method on the validation indices (or the given ones)."""
    idx = _check_split(dataset, indices)
    samples = [dataset.samples[i] for i in idx]
    chosen = {
        Method.EXHAUSTIVE: [s.best_ru for s in samples],
        Method.ALGO2_TRUE_IBBC: [algo2_infer(stack, s.zeta_low, s.ibbc) for s in samples],
        Method.THREE_STEP: [three_step_infer(stack, s) for s in samples],
        Method.ALGO3_ONLY: [algo3_infer(stack, s.zeta_low) for s in samples],
    }
    return {m: _result(m, dataset, idx, c) for m, c in chosen.items()}


def method_results_csv(results) -> str:
    """CSV text: method, sample_index, chosen_ru, achieved_snr_db, best_ru, snr_gap_db."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "sample_index", "chosen_ru", "achieved_snr_db", "best_ru", "snr_gap_db"])
    for res in results.values() if isinstance(results, dict) else results:
        for i, r, snr, b, gap in zip(
            res.sample_indices, res.chosen_ru, res.achieved_snr_db, res.best_ru, res.snr_gap_db
        ):
            w.writerow([res.method.value, i, r, repr(float(snr)), b, repr(float(gap))])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# training


def train_config_from(config: ExperimentConfig, seed: int | None = None) -> TrainConfig:
    t = config.train
    return TrainConfig(
        t.learning_rate, t.momentum, t.epochs, t.batch_size, t.seed if seed is None else seed, t.init_scale
    )


def train_algorithm(
    dataset: Dataset, algo: int, cfg: TrainConfig
) -> tuple[MlpModel, TrainReport]:
    """Fit one classifier on the training split, selecting on the validation split."""
    mode = ALGO_MODES[algo]
    X, y = feature_matrix(dataset, mode, dataset.train_indices)
    Xv, yv = feature_matrix(dataset, mode, dataset.val_indices)
    n_classes = len(dataset.config.ibbc_grid_deg) if algo == 1 else dataset.n_ru
    model = init_model(X.shape[1], n_classes, seed=cfg.seed, init_scale=cfg.init_scale)
    return train(model, (X, y), (Xv, yv), cfg)


def stack_from_models(models: dict[int, Classifier], config: ExperimentConfig) -> InferenceStack:
    from .arrays import ibbc_set

    return InferenceStack(
        models[1],
        models[2],
        models[3],
        tuple(ibbc_set(config.ibbc_grid_deg)),
        config.features.floor_db,
        config.features.ceil_db,
    )


# ---------------------------------------------------------------------------
# genie stubs


class LookupClassifier:
    """Memorises feature vectors and answers each with a one-hot of its label.

    Unknown inputs get a uniform vector, so the argmax falls back to class 0.
    """

    trained = True

    def __init__(self, in_dim: int, n_classes: int):
        self._in_dim = in_dim
        self._n_classes = n_classes
        self._table: dict[bytes, int] = {}

    @property
    def in_dim(self) -> int:
        return self._in_dim

    @property
    def n_classes(self) -> int:
        return self._n_classes

    def memorize(self, x, label: int) -> None:
        key = np.ascontiguousarray(x, dtype=float).tobytes()
        prior = self._table.setdefault(key, label)
        if prior != label:
            raise ValueError("conflicting labels for one feature vector")

    def predict_proba(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim > 1:
            return np.stack([self.predict_proba(row) for row in x])
        label = self._table.get(np.ascontiguousarray(x).tobytes())
        if label is None:
            return np.full(self._n_classes, 1.0 / self._n_classes)
        return one_hot(label, self._n_classes)


def genie_stack(dataset: Dataset) -> InferenceStack:
    """Oracle classifiers built from the dataset's own labels.

    The coarse-RU genie answers with the label of the first sample sharing a
    low-band PDP; it cannot do better, since that PDP is shared across IBBCs.
    The IBBC genie recognises the high-band PDP to any RU, so the composition
    recovers the exhaustive choice whatever the coarse RU was.
    """
    from .arrays import ibbc_set

    cfg = dataset.config
    ibbcs = tuple(ibbc_set(cfg.ibbc_grid_deg))
    f = cfg.features
    norm = lambda v: normalize_pdp(v, f.floor_db, f.ceil_db)  # noqa: E731
    n_low = len(dataset.samples[0].zeta_low)
    n_high = dataset.samples[0].zeta_high_per_ru.shape[1]
    a1 = LookupClassifier(n_low + n_high, len(ibbcs))
    a2 = LookupClassifier(n_low + len(ibbcs), dataset.n_ru)
    a3 = LookupClassifier(n_low, dataset.n_ru)
    seen_low: set[bytes] = set()
    for s in dataset.samples:
        low = norm(s.zeta_low)
        key = low.tobytes()
        if key not in seen_low:
            seen_low.add(key)
            a3.memorize(low, s.best_ru)
        a2.memorize(np.concatenate([low, one_hot(s.ibbc.index, len(ibbcs))]), s.best_ru)
        for zh in s.zeta_high_per_ru:
            a1.memorize(np.concatenate([low, norm(zh)]), s.ibbc.index)
    return InferenceStack(a1, a2, a3, ibbcs, f.floor_db, f.ceil_db)

