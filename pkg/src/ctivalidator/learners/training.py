"""Model building: splits, budgets, tuning, candidate builds and selection.

A *candidate* is one (encoding scheme, algorithm family) pair.  Building a
candidate fits its encoder, tunes hyperparameters by seeded random search
on an internal validation cut, trains on the training split and evaluates
on the held-out split.  Each candidate runs under its own
:class:`BuildBudget`; candidates that exceed it are reported as timed out
and excluded from selection, never silently dropped.

``select_optimal`` ranks survivors by held-out macro F1, breaking ties by
lower computation time and finally by the fixed family order, so selection
is total and reproducible whenever the F1 optimum is unique.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .. import evaluation, features
from ..errors import (
    BudgetExceededError,
    ContractError,
    NoModelFoundError,
    SpecMismatchError,
)
from . import algorithms
from .algorithms import FAMILIES, families_for_tiers, make_model, model_from_payload

logger = logging.getLogger(__name__)

_MODEL_FORMAT_VERSION = "1"

DEFAULT_TEST_FRACTION = 0.3
DEFAULT_TIERS = (algorithms.REQUIRED_TIER,)
DEFAULT_N_TRIALS = 6


@dataclass(frozen=True)
class BuildBudget:
    """Per-candidate wall-clock and memory ceiling.

    ``memory_limit`` is enforced as an up-front estimate
    (rows x width x 8 bytes x family factor); the wall clock is checked
    cooperatively at iteration boundaries.
    """

    wall_clock_limit: float = 24 * 3600.0
    memory_limit: int = 10 * 2**30

    def __post_init__(self):
        if self.wall_clock_limit <= 0:
            raise ContractError("wall_clock_limit must be positive")
        if self.memory_limit <= 0:
            raise ContractError("memory_limit must be positive")


DEFAULT_BUDGET = BuildBudget()


class BudgetClock:
    """Cooperative budget enforcement shared across one candidate build."""

    def __init__(self, budget: BuildBudget):
        self.budget = budget
        self.started = time.perf_counter()

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.started

    def check(self) -> None:
        elapsed = self.elapsed
        if elapsed > self.budget.wall_clock_limit:
            raise BudgetExceededError("time", elapsed)

    def ensure_memory(self, rows: int, width: int, factor: int) -> None:
        estimate = rows * max(width, 1) * 8 * factor
        if estimate > self.budget.memory_limit:
            raise BudgetExceededError(
                "memory", self.elapsed,
                f"estimated {estimate} bytes exceeds limit {self.budget.memory_limit}")


# ---------------------------------------------------------------------------
# Splits and label codes


@dataclass(frozen=True)
class SplitResult:
    train_idx: np.ndarray
    test_idx: np.ndarray
    stratified: bool

    @property
    def n_test(self) -> int:
        return int(self.test_idx.shape[0])


def make_label_map(labels) -> tuple[tuple, np.ndarray]:
    """First-appearance label catalogue and the integer code per row."""
    catalogue: dict = {}
    for value in labels:
        catalogue.setdefault(value, len(catalogue))
    codes = np.array([catalogue[v] for v in labels], dtype=np.int64)
    return tuple(catalogue), codes


def split(y_codes: np.ndarray, test_fraction: float, seed: int) -> SplitResult:
    """Seeded train/test row split; |test| = round(fraction * N).

    The split is stratified per class whenever every class has at least two
    members; otherwise it falls back to a plain shuffle and says so in the
    result.  Per-class test quotas are largest-remainder rounded so the
    total always matches.
    """
    n = int(y_codes.shape[0])
    if not 0.0 < test_fraction < 1.0:
        raise ContractError("test_fraction must be in (0, 1)")
    if n < 2:
        raise ContractError("need at least two rows to split")
    n_test = int(round(test_fraction * n))
    n_test = min(max(n_test, 1), n - 1)
    rng = np.random.default_rng(seed)

    counts = np.bincount(y_codes)
    present = np.flatnonzero(counts)
    stratified = bool((counts[present] >= 2).all())
    if not stratified:
        perm = rng.permutation(n)
        return SplitResult(train_idx=np.sort(perm[n_test:]),
                           test_idx=np.sort(perm[:n_test]), stratified=False)

    # Largest-remainder allocation: per-class quotas floor(fraction * n_c),
    # leftovers handed out by fractional part so the total is exactly n_test.
    # Quotas are capped at n_c - 1 to keep every class represented in train.
    exact = counts[present] * test_fraction
    quota = np.floor(exact).astype(np.int64)
    cap = counts[present].astype(np.int64) - 1
    quota = np.minimum(quota, cap)
    deficit = n_test - int(quota.sum())
    order = np.argsort(-(exact - quota), kind="stable")
    step = 0
    while deficit > 0 and step < 2 * len(order) * (1 + n_test):
        pos = order[step % len(order)]
        if quota[pos] < cap[pos]:
            quota[pos] += 1
            deficit -= 1
        step += 1
    while deficit < 0:
        for pos in order[::-1]:
            if quota[pos] > 0:
                quota[pos] -= 1
                deficit += 1
                break
        else:
            break
    if int(quota.sum()) != n_test:
        # capacity exhausted (huge fraction, many tiny classes): plain split
        perm = rng.permutation(n)
        return SplitResult(train_idx=np.sort(perm[n_test:]),
                           test_idx=np.sort(perm[:n_test]), stratified=False)
    test_parts = []
    for cls, q in zip(present, quota):
        rows = np.flatnonzero(y_codes == cls)
        rows = rows[rng.permutation(rows.shape[0])]
        test_parts.append(rows[:int(q)])
    test_idx = np.sort(np.concatenate(test_parts))
    mask = np.ones(n, dtype=bool)
    mask[test_idx] = False
    return SplitResult(train_idx=np.flatnonzero(mask), test_idx=test_idx,
                       stratified=True)


# ---------------------------------------------------------------------------
# Train / tune / predict


def train(family: str, params: dict, X: np.ndarray, y_codes: np.ndarray,
          n_classes: int, budget: BuildBudget, seed: int,
          clock: BudgetClock | None = None):
    """Fit one model; returns (model, train_time in seconds).

    Raises BudgetExceededError when the cooperative budget trips; the
    exception carries the elapsed time so the caller can report a
    timed-out candidate.
    """
    if X.shape[0] != y_codes.shape[0]:
        raise ContractError("matrix and labels disagree on row count")
    if X.shape[0] == 0:
        raise ContractError("cannot train on an empty matrix")
    clock = clock or BudgetClock(budget)
    clock.ensure_memory(X.shape[0], X.shape[1], FAMILIES[family].memory_factor)
    model = make_model(family, params)
    rng = np.random.default_rng(seed)
    started = time.perf_counter()
    model.fit(X, y_codes, n_classes, rng, clock)
    return model, time.perf_counter() - started


def predict(model, X: np.ndarray, width: int | None = None):
    """Predict label codes; returns (codes, predict_time in seconds).

    Never abstains: every row gets a code, unseen patterns included.
    """
    if width is not None and X.shape[1] != width:
        raise SpecMismatchError(
            f"matrix width {X.shape[1]} does not match model width {width}")
    started = time.perf_counter()
    codes = model.predict_codes(X)
    return codes, time.perf_counter() - started


class SearchStrategy(Protocol):
    """Pluggable hyperparameter proposal order."""

    def propose(self, grid_points: list[dict], n_trials: int,
                rng: np.random.Generator) -> list[dict]:
        ...


class RandomSearchStrategy:
    """Seeded shuffle of the grid, first ``n_trials`` points."""

    def propose(self, grid_points, n_trials, rng):
        order = rng.permutation(len(grid_points))
        return [grid_points[i] for i in order[:max(1, n_trials)]]


def grid_points(family: str) -> list[dict]:
    grid = FAMILIES[family].grid
    names = sorted(grid)
    points: list[dict] = [{}]
    for name in names:
        points = [dict(p, **{name: v}) for p in points for v in grid[name]]
    return points


@dataclass
class TuneResult:
    best_params: dict
    trials: list[tuple[dict, float, float]]  # (params, inner f1, train_time)


def tune(family: str, X: np.ndarray, y_codes: np.ndarray, n_classes: int,
         budget: BuildBudget, seed: int, n_trials: int = DEFAULT_N_TRIALS,
         strategy: SearchStrategy | None = None,
         clock: BudgetClock | None = None) -> TuneResult:
    """Seeded random search over the family grid with an internal split.

    Trials are scored by macro F1 on the internal validation cut; ties go
    to the trial with the lower train time.  A single-point grid returns
    that point after one trial.
    """
    clock = clock or BudgetClock(budget)
    strategy = strategy or RandomSearchStrategy()
    rng = np.random.default_rng(seed)
    proposals = strategy.propose(grid_points(family), n_trials, rng)
    if y_codes.shape[0] < 4:
        # too small for an inner cut; take the first seeded proposal
        return TuneResult(best_params=proposals[0], trials=[])

    inner = split(y_codes, DEFAULT_TEST_FRACTION, seed=seed + 1)
    X_fit, y_fit = X[inner.train_idx], y_codes[inner.train_idx]
    X_val, y_val = X[inner.test_idx], y_codes[inner.test_idx]

    best: tuple[float, float, dict] | None = None  # (f1, train_time, params)
    trials: list[tuple[dict, float, float]] = []
    for trial_no, params in enumerate(proposals):
        clock.check()
        model, fit_time = train(family, params, X_fit, y_fit, n_classes,
                                budget, seed=seed + 100 + trial_no, clock=clock)
        codes, _ = predict(model, X_val)
        counts = evaluation.confusion(list(y_val), list(codes))
        f1 = evaluation.metrics(counts).f1
        trials.append((params, f1, fit_time))
        if best is None or f1 > best[0] or (f1 == best[0] and fit_time < best[1]):
            best = (f1, fit_time, params)
    return TuneResult(best_params=best[2], trials=trials)


# ---------------------------------------------------------------------------
# Trained model container


@dataclass
class TrainedModel:
    """A fitted candidate with everything needed to reuse it later.

    ``timing`` fields are the designated wall-clock data; they are stored
    in the container but excluded from :meth:`canonical_bytes`, which is
    the byte-for-byte identity used by reproducibility checks.
    """

    family: str
    scheme: str
    params: dict
    label_map: tuple
    encoder_spec: features.EncoderSpec
    model: object
    eval_report: evaluation.EvalReport
    timing: evaluation.TimingReport
    requirement_key: str = ""
    dataset_fingerprint: str = ""
    seed: int = 0

    @property
    def f1(self) -> float:
        return self.eval_report.f1

    def predict_codes(self, X: np.ndarray) -> np.ndarray:
        codes, _ = predict(self.model, X, width=self.encoder_spec.width)
        return codes

    def predict_labels(self, matrix: features.FeatureMatrix) -> list:
        codes = self.predict_codes(matrix.values)
        return [self.label_map[c] for c in codes]

    def to_document(self) -> dict:
        return {
            "format_version": _MODEL_FORMAT_VERSION,
            "family": self.family,
            "scheme": self.scheme,
            "params": self.params,
            "label_map": list(self.label_map),
            "encoder_spec": self.encoder_spec.to_bytes().decode("utf-8"),
            "payload": self.model.payload(),
            "eval": evaluation.report_to_doc(self.eval_report),
            "timing": evaluation.timing_to_doc(self.timing),
            "requirement_key": self.requirement_key,
            "dataset_fingerprint": self.dataset_fingerprint,
            "seed": self.seed,
        }

    def canonical_bytes(self) -> bytes:
        doc = self.to_document()
        doc.pop("timing")  # wall-clock measurements are not model identity
        return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_document(), handle, sort_keys=True, indent=1)
            handle.write("\n")

    @classmethod
    def from_document(cls, doc: dict) -> "TrainedModel":
        if doc.get("format_version") != _MODEL_FORMAT_VERSION:
            raise SpecMismatchError(
                f"unsupported model format version: {doc.get('format_version')!r}")
        return cls(
            family=doc["family"],
            scheme=doc["scheme"],
            params=doc["params"],
            label_map=tuple(doc["label_map"]),
            encoder_spec=features.EncoderSpec.from_bytes(
                doc["encoder_spec"].encode("utf-8")),
            model=model_from_payload(doc["family"], doc["payload"]),
            eval_report=evaluation.report_from_doc(doc["eval"]),
            timing=evaluation.timing_from_doc(doc["timing"]),
            requirement_key=doc.get("requirement_key", ""),
            dataset_fingerprint=doc.get("dataset_fingerprint", ""),
            seed=doc.get("seed", 0),
        )

    @classmethod
    def load(cls, path) -> "TrainedModel":
        with open(path, "r", encoding="utf-8") as handle:
            return cls.from_document(json.load(handle))


@dataclass(frozen=True)
class CandidateFailure:
    family: str
    scheme: str
    kind: str  # time | memory | error
    elapsed: float
    message: str = ""


@dataclass
class BuildReport:
    candidates: list[TrainedModel]
    failures: list[CandidateFailure] = field(default_factory=list)
    seed: int = 0

    @property
    def all_failed(self) -> bool:
        return not self.candidates


# ---------------------------------------------------------------------------
# Candidate builds and selection


def build_candidates(table, requirement=None, budget: BuildBudget = DEFAULT_BUDGET,
                     seed: int = 0, *, tiers=DEFAULT_TIERS,
                     n_trials: int = DEFAULT_N_TRIALS, parallelism: int = 1,
                     test_fraction: float = DEFAULT_TEST_FRACTION,
                     requirement_key: str = "", dataset_fingerprint: str = "",
                     strategy: SearchStrategy | None = None) -> BuildReport:
    """Build every (scheme x family) candidate for a selected table.

    ``table`` provides ``observed`` columns and ``labels`` (see
    ingest.SelectedTable).  Candidates run independently — optionally in
    threads — and each gets a fresh budget clock.  The report carries the
    surviving models plus one failure entry per candidate that timed out
    or crashed.
    """
    family_names = families_for_tiers(tiers)
    label_map, codes = make_label_map(table.labels)
    n_classes = len(label_map)
    if n_classes < 1:
        raise ContractError("no labels to learn from")

    prepared: list[tuple[str, features.FeatureMatrix, features.EncoderSpec, SplitResult]] = []
    for scheme in features.SCHEMES:
        matrix, spec = features.fit_transform(table.observed, scheme=scheme, seed=seed)
        cut = split(codes, test_fraction, seed=seed)
        prepared.append((scheme, matrix, spec, cut))

    jobs = []
    job_seed = {}
    for s_idx, (scheme, matrix, spec, cut) in enumerate(prepared):
        for f_idx, family in enumerate(family_names):
            jobs.append((scheme, matrix, spec, cut, family))
            # stable per-candidate seed, independent of execution order
            job_seed[(scheme, family)] = seed * 100003 + s_idx * 1009 + f_idx * 13 + 1

    def run(job):
        scheme, matrix, spec, cut, family = job
        cand_seed = job_seed[(scheme, family)]
        clock = BudgetClock(budget)
        started = time.perf_counter()
        try:
            clock.ensure_memory(matrix.rows, matrix.columns,
                                FAMILIES[family].memory_factor)
            X_train, y_train = matrix.values[cut.train_idx], codes[cut.train_idx]
            X_test, y_test = matrix.values[cut.test_idx], codes[cut.test_idx]
            tuned = tune(family, X_train, y_train, n_classes, budget,
                         seed=cand_seed, n_trials=n_trials, strategy=strategy,
                         clock=clock)
            model, _ = train(family, tuned.best_params, X_train, y_train,
                             n_classes, budget, seed=cand_seed, clock=clock)
            train_time = time.perf_counter() - started  # tuning included
            report, timing = evaluation.evaluate(
                model, X_test, y_test, label_names=label_map, train_time=train_time)
            return TrainedModel(
                family=family, scheme=scheme, params=tuned.best_params,
                label_map=label_map, encoder_spec=spec, model=model,
                eval_report=report, timing=timing,
                requirement_key=requirement_key,
                dataset_fingerprint=dataset_fingerprint, seed=cand_seed)
        except BudgetExceededError as exc:
            logger.info("candidate %s/%s timed out (%s)", scheme, family, exc.kind)
            return CandidateFailure(family, scheme, exc.kind, exc.elapsed, str(exc))
        except Exception as exc:  # noqa: BLE001 - candidate isolation
            logger.warning("candidate %s/%s failed: %s", scheme, family, exc)
            return CandidateFailure(family, scheme, "error",
                                    time.perf_counter() - started, str(exc))

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]

    report = BuildReport(candidates=[], seed=seed)
    for result in results:
        if isinstance(result, TrainedModel):
            report.candidates.append(result)
        else:
            report.failures.append(result)
    return report


def select_optimal(candidates) -> TrainedModel:
    """Pick the candidate with the best held-out F1.

    Ties break toward lower computation time, then the fixed family order,
    then the encoding scheme order, so the choice is always total.
    """
    pool = list(candidates)
    if not pool:
        raise NoModelFoundError("no candidate model survived the build")

    def rank(model: TrainedModel):
        return (
            -model.eval_report.f1,
            model.timing.computation_time,
            FAMILIES[model.family].rank,
            features.SCHEMES.index(model.scheme),
        )

    return min(pool, key=rank)
