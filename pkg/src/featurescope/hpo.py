"""Hyperparameter search over hidden size, batch size, and learning rate.

The sampler is a univariate Tree-structured Parzen Estimator: once enough
trials have completed, each parameter's history is split into a "good" set
(the best ceil(gamma(n)) trials by final value) and a "bad" set, one-dim
Gaussian kernel density estimates l(x) and g(x) are fitted over the two
sets in a transformed coordinate (log for the learning rate, linear for
the integers), and the suggestion is the candidate, drawn from l, that
maximizes l(x)/g(x). Before that, suggestions are plain seeded uniform
draws. Both density estimates carry a wide prior component at the middle
of the (transformed) range, and kernel bandwidths are per point: each
point's width is its largest gap to a neighbor, clipped to [1% of the
range, range]. The prior keeps the ratio bounded far from the data, and
the per-point widths preserve the local l/g contrast that drives
late-stage refinement.

An optional median pruner stops a trial whose intermediate value is
strictly worse than the median of prior completed trials at the same step.

Studies are resumable: every finished trial is appended to a newline-
delimited JSON journal, and the per-trial RNG is derived from
(study seed, trial id), so a resumed study replays identically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Union

import numpy as np

from . import mlp
from .store import TrainingSet

Params = dict[str, Union[int, float]]


class StudyError(RuntimeError):
    """No trial completed, so the study has no best value."""


class TrialPruned(Exception):
    """Raised inside an objective when the pruner stops the trial."""


class TrialFailed(Exception):
    """Raised inside an objective to mark the trial failed (study continues)."""


@dataclass(frozen=True)
class IntRange:
    lo: int
    hi: int

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise ValueError(f"empty integer range [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class LogRange:
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (0.0 < self.lo <= self.hi):
            raise ValueError(f"log range bounds must be positive and ordered, got "
                             f"[{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class SearchSpace:
    hidden_size: IntRange
    batch_size: IntRange = IntRange(16, 128)
    learning_rate: LogRange = LogRange(1e-6, 1.0)


def derive_search_space(input_dim: int, output_dim: int) -> SearchSpace:
    """Hidden-size range [m, min(2m, M)] where m/M are the smaller/larger of
    the embedding length and the feature-vector length."""
    if input_dim < 1 or output_dim < 1:
        raise ValueError("dimensions must be >= 1")
    m = min(input_dim, output_dim)
    big = max(input_dim, output_dim)
    return SearchSpace(hidden_size=IntRange(m, min(2 * m, big)))


@dataclass
class TrialRecord:
    trial_id: int
    params: Params
    intermediate_values: list[tuple[int, float]] = field(default_factory=list)
    status: str = "running"
    final_value: float | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "trial_id": self.trial_id,
                "params": self.params,
                "intermediate_values": [[s, v] for s, v in self.intermediate_values],
                "status": self.status,
                "final_value": self.final_value,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> "TrialRecord":
        raw = json.loads(line)
        return cls(
            trial_id=int(raw["trial_id"]),
            params=raw["params"],
            intermediate_values=[(int(s), float(v)) for s, v in raw["intermediate_values"]],
            status=raw["status"],
            final_value=raw["final_value"],
        )


def default_gamma(n: int) -> int:
    """ceil(0.1 n), clamped to [1, 25]."""
    return min(max(math.ceil(0.1 * n), 1), 25)


@dataclass(frozen=True)
class TpeConfig:
    seed: int = 0
    n_startup: int = 10
    n_candidates: int = 24
    gamma: Callable[[int], int] = default_gamma


@dataclass(frozen=True)
class RandomConfig:
    seed: int = 0


@dataclass(frozen=True)
class MedianPrunerConfig:
    n_startup_trials: int = 5
    n_warmup_steps: int = 0


@dataclass(frozen=True)
class StudyConfig:
    n_trials: int = 100
    sampler: TpeConfig | RandomConfig = TpeConfig()
    pruner: MedianPrunerConfig | None = None
    objective: str = "validation_loss"

    def __post_init__(self) -> None:
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")


def study_config_to_json(config: StudyConfig) -> str:
    if isinstance(config.sampler, TpeConfig):
        sampler = {
            "kind": "tpe",
            "seed": config.sampler.seed,
            "n_startup": config.sampler.n_startup,
            "n_candidates": config.sampler.n_candidates,
        }
    else:
        sampler = {"kind": "random", "seed": config.sampler.seed}
    pruner = None
    if config.pruner is not None:
        pruner = {
            "n_startup_trials": config.pruner.n_startup_trials,
            "n_warmup_steps": config.pruner.n_warmup_steps,
        }
    return json.dumps(
        {"n_trials": config.n_trials, "sampler": sampler, "pruner": pruner,
         "objective": config.objective},
        sort_keys=True,
    )


def study_config_from_json(text: str) -> StudyConfig:
    raw = json.loads(text)
    s = raw["sampler"]
    if s["kind"] == "tpe":
        sampler: TpeConfig | RandomConfig = TpeConfig(
            seed=int(s.get("seed", 0)),
            n_startup=int(s.get("n_startup", 10)),
            n_candidates=int(s.get("n_candidates", 24)),
        )
    elif s["kind"] == "random":
        sampler = RandomConfig(seed=int(s.get("seed", 0)))
    else:
        raise ValueError(f"unknown sampler kind {s['kind']!r}")
    pruner = None
    if raw.get("pruner") is not None:
        p = raw["pruner"]
        pruner = MedianPrunerConfig(
            n_startup_trials=int(p.get("n_startup_trials", 5)),
            n_warmup_steps=int(p.get("n_warmup_steps", 0)),
        )
    return StudyConfig(
        n_trials=int(raw["n_trials"]),
        sampler=sampler,
        pruner=pruner,
        objective=raw.get("objective", "validation_loss"),
    )


# Parameter order is fixed so seeded draws are reproducible.
_PARAM_NAMES = ("hidden_size", "batch_size", "learning_rate")


def uniform_draw(space: SearchSpace, rng: np.random.Generator) -> Params:
    """Independent uniform draw: integers for the sizes, log-uniform for
    the learning rate. Draw order is fixed (hidden, batch, lr)."""
    hidden = int(rng.integers(space.hidden_size.lo, space.hidden_size.hi + 1))
    batch = int(rng.integers(space.batch_size.lo, space.batch_size.hi + 1))
    lr = float(np.exp(rng.uniform(math.log(space.learning_rate.lo),
                                  math.log(space.learning_rate.hi))))
    return {"hidden_size": hidden, "batch_size": batch, "learning_rate": lr}


def mixture_components(
    points: np.ndarray, lo_t: float, hi_t: float
) -> tuple[np.ndarray, np.ndarray]:
    """Kernel locations and per-kernel widths for one density estimate.

    The locations are the data points plus one prior component at the
    middle of the range. Each data kernel's width is its larger gap to an
    adjacent location, clipped to [1% of the range, range]; the prior
    keeps the full range as its width.
    """
    width = hi_t - lo_t
    mus = np.append(points, 0.5 * (lo_t + hi_t))
    n = len(mus)
    order = np.argsort(mus, kind="stable")
    sorted_mus = mus[order]
    if n == 1:
        raw = np.array([width])
    else:
        gap_left = np.diff(sorted_mus, prepend=sorted_mus[0])
        gap_right = np.diff(sorted_mus, append=sorted_mus[-1])
        raw = np.maximum(gap_left, gap_right)
        raw[0] = gap_right[0]
        raw[-1] = gap_left[-1]
    clipped = np.clip(raw, 0.01 * width, width)
    sigmas = np.empty(n)
    sigmas[order] = clipped
    sigmas[-1] = width
    return mus, sigmas


def kde_logpdf(locations: np.ndarray, widths: np.ndarray, x: float) -> float:
    """Log density of an equal-weight Gaussian mixture at ``x``."""
    z = (x - locations) / widths
    log_kernels = -0.5 * z**2 - np.log(widths * math.sqrt(2.0 * math.pi))
    m = float(np.max(log_kernels))
    return m + math.log(float(np.mean(np.exp(log_kernels - m))))


def _suggest_one(
    values: np.ndarray,
    n_good: int,
    lo_t: float,
    hi_t: float,
    rng: np.random.Generator,
    n_candidates: int,
    snap: Callable[[float], float],
) -> float:
    """TPE step for one parameter in its transformed coordinate.

    ``values`` are transformed parameter values ordered best-first;
    ``snap`` maps a raw draw onto the parameter's grid (rounding for
    integers, identity for floats) in transformed coordinates.
    """
    good_mus, good_sigmas = mixture_components(values[:n_good], lo_t, hi_t)
    bad_mus, bad_sigmas = mixture_components(values[n_good:], lo_t, hi_t)

    picks = rng.integers(0, len(good_mus), size=n_candidates)
    draws = good_mus[picks] + good_sigmas[picks] * rng.standard_normal(n_candidates)
    draws = np.clip(draws, lo_t, hi_t)
    candidates = np.array([snap(d) for d in draws])

    scores = [
        kde_logpdf(good_mus, good_sigmas, c) - kde_logpdf(bad_mus, bad_sigmas, c)
        for c in candidates
    ]
    return float(candidates[int(np.argmax(scores))])


def tpe_suggest(
    history: list[TrialRecord],
    space: SearchSpace,
    rng: np.random.Generator,
    n_startup: int = 10,
    n_candidates: int = 24,
    gamma: Callable[[int], int] = default_gamma,
) -> Params:
    """Suggest the next parameter set given completed trials.

    With fewer than ``n_startup`` completed trials this is a pure uniform
    draw, independent of the recorded values. Afterwards each parameter is
    suggested independently by the l/g density-ratio rule.
    """
    completed = [t for t in history if t.status == "complete"]
    if len(completed) < n_startup:
        return uniform_draw(space, rng)

    order = sorted(range(len(completed)), key=lambda i: (completed[i].final_value, i))
    n = len(completed)
    n_good = min(max(gamma(n), 1), n - 1)

    out: Params = {}
    for name in _PARAM_NAMES:
        if name == "learning_rate":
            rng_spec = space.learning_rate
            lo_t, hi_t = math.log(rng_spec.lo), math.log(rng_spec.hi)
            snap = lambda t: t  # noqa: E731
        else:
            rng_spec = getattr(space, name)
            lo_t, hi_t = float(rng_spec.lo), float(rng_spec.hi)
            snap = lambda t: float(round(t))  # noqa: E731
        if hi_t <= lo_t:
            # Collapsed range: only one admissible value.
            out[name] = rng_spec.lo
            continue
        values = np.array(
            [float(completed[i].params[name]) for i in order], dtype=np.float64
        )
        if name == "learning_rate":
            values = np.log(values)
        chosen = _suggest_one(values, n_good, lo_t, hi_t, rng, n_candidates, snap)
        if name == "learning_rate":
            out[name] = float(np.exp(chosen))
        else:
            out[name] = int(round(chosen))
    return out


def median_prune_decision(
    current: TrialRecord,
    step: int,
    history: list[TrialRecord],
    n_startup_trials: int = 5,
    n_warmup_steps: int = 0,
) -> bool:
    """True iff the trial should be pruned at ``step``.

    Requires ``n_startup_trials`` prior completed trials and
    ``step >= n_warmup_steps``; prunes when the current intermediate value
    is strictly greater than the median of prior completed trials' values
    at the same step (trials without a value there are excluded).
    """
    current_values = dict(current.intermediate_values)
    if step not in current_values:
        raise ValueError(f"trial {current.trial_id} has no intermediate value at step {step}")
    completed = [t for t in history if t.status == "complete"]
    if len(completed) < n_startup_trials:
        return False
    if step < n_warmup_steps:
        return False
    at_step = [dict(t.intermediate_values)[step] for t in completed
               if step in dict(t.intermediate_values)]
    if not at_step:
        return False
    return current_values[step] > float(np.median(at_step))


# Objective contract: called with the sampled params and a report callback;
# report(step, value) records an intermediate and may raise TrialPruned.
Objective = Callable[[Params, Callable[[int, float], None]], float]


def _append_journal(path: Path | None, record: TrialRecord) -> None:
    if path is None:
        return
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(record.to_json() + "\n")


def load_journal(path: str | Path) -> list[TrialRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(TrialRecord.from_json(line))
    return records


def optimize(
    config: StudyConfig,
    space: SearchSpace,
    objective: Objective,
    journal_path: str | Path | None = None,
) -> tuple[TrialRecord, list[TrialRecord]]:
    """Run the sampling/pruning loop against an arbitrary objective.

    Returns the best completed trial (minimal final value, ties to the
    lower trial id) and all trial records. Resumes from an existing
    journal when one is given.
    """
    journal = Path(journal_path) if journal_path is not None else None
    records: list[TrialRecord] = []
    if journal is not None and journal.exists():
        records = load_journal(journal)

    sampler = config.sampler
    for trial_id in range(len(records), config.n_trials):
        rng = np.random.default_rng([sampler.seed, trial_id])
        completed = [r for r in records if r.status == "complete"]
        if isinstance(sampler, RandomConfig):
            params = uniform_draw(space, rng)
        else:
            params = tpe_suggest(
                completed, space, rng,
                n_startup=sampler.n_startup,
                n_candidates=sampler.n_candidates,
                gamma=sampler.gamma,
            )

        record = TrialRecord(trial_id=trial_id, params=params)

        def report(step: int, value: float, _rec: TrialRecord = record) -> None:
            _rec.intermediate_values.append((step, float(value)))
            if config.pruner is not None and median_prune_decision(
                _rec, step, records,
                n_startup_trials=config.pruner.n_startup_trials,
                n_warmup_steps=config.pruner.n_warmup_steps,
            ):
                raise TrialPruned(f"trial {_rec.trial_id} pruned at step {step}")

        try:
            value = objective(params, report)
            if value is None or not math.isfinite(value):
                record.status = "failed"
            else:
                record.status = "complete"
                record.final_value = float(value)
        except TrialPruned:
            record.status = "pruned"
        except TrialFailed:
            record.status = "failed"
        records.append(record)
        _append_journal(journal, record)

    completed = [r for r in records if r.status == "complete"]
    if not completed:
        raise StudyError("no trial completed; every trial was pruned or failed")
    best = min(completed, key=lambda r: (r.final_value, r.trial_id))
    return best, records


def run_study(
    config: StudyConfig,
    dataset: TrainingSet,
    base_config: mlp.MlpConfig,
    metadata: mlp.ModelMetadata | None = None,
    journal_path: str | Path | None = None,
) -> tuple[mlp.ProjectorModel, TrialRecord, list[TrialRecord]]:
    """Tune hidden size, batch size, and learning rate for MLP training.

    Each trial trains via :func:`featurescope.mlp.train` with per-epoch
    validation losses reported as intermediate values (so the pruner can
    act mid-training); the trial's final value is its best validation
    loss. Returns the model of the best completed trial along with its
    record and the full trial list.
    """
    space = derive_search_space(base_config.input_dim, base_config.output_dim)
    best_cell: dict[str, object] = {}

    def objective(params: Params, report: Callable[[int, float], None]) -> float:
        trial_config = replace(
            base_config,
            hidden_size=int(params["hidden_size"]),
            batch_size=int(params["batch_size"]),
            learning_rate=float(params["learning_rate"]),
        )
        try:
            model, train_report = mlp.train(
                dataset, trial_config, metadata=metadata, epoch_hook=report
            )
        except mlp.TrainingDivergedError as exc:
            raise TrialFailed(str(exc)) from exc
        value = train_report.best_val_loss
        if "value" not in best_cell or value < best_cell["value"]:  # type: ignore[operator]
            best_cell["value"] = value
            best_cell["model"] = model
            best_cell["params"] = dict(params)
        return value

    best_trial, records = optimize(config, space, objective, journal_path=journal_path)

    # After a resume the in-memory model may not belong to the winning
    # trial; retrain it (training is deterministic in its inputs).
    if best_cell.get("params") != best_trial.params:
        winning_config = replace(
            base_config,
            hidden_size=int(best_trial.params["hidden_size"]),
            batch_size=int(best_trial.params["batch_size"]),
            learning_rate=float(best_trial.params["learning_rate"]),
        )
        model, _ = mlp.train(dataset, winning_config, metadata=metadata)
    else:
        model = best_cell["model"]  # type: ignore[assignment]
    return model, best_trial, records
