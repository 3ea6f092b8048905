"""End-to-end experiment runner: one estimate per run, MSE aggregated per grid cell."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .aggregation import corr_rr_estimate, rsfd_estimate, rsrfd_estimate, spl_estimate
from .core import (
    Dataset,
    MarginalTable,
    RngStream,
    ShapeError,
    SplitError,
    check_epsilon,
    clamp_normalize,
    load_dataset,
    rng_stream,
    true_marginals,
)
from .mechanisms import (
    CORR_RR,
    MECHANISMS,
    RSFD,
    RSRFD,
    SPL,
    corr_rr_phase2_batch,
    rsfd_perturb_batch,
    rsrfd_perturb_batch,
    spl_perturb_batch,
)
from .pyopt import infer_py_matrix
from .synth import SynthSpec, gen_synthetic

CSV_COLUMNS = (
    "mechanism", "epsilon", "d", "k", "source", "phase1_fraction",
    "mse_mean", "mse_std", "runs", "wall_ms",
)

_ALIASES = {"RS+FD": RSFD, "RS+RFD": RSRFD, "CORR-RR": CORR_RR, "CORRRR": CORR_RR}


def canonical_mechanism(name: str) -> str:
    key = name.strip().upper()
    key = _ALIASES.get(key, key)
    if key not in MECHANISMS:
        raise ValueError(f"unknown mechanism {name!r}; choose from {MECHANISMS}")
    return key


def mse_metric(truth: MarginalTable, estimate: MarginalTable) -> float:
    """Mean over attributes of the mean squared error over that attribute's values."""
    if len(truth) != len(estimate):
        raise ShapeError(f"{len(truth)} attributes vs {len(estimate)}")
    per_attr = []
    for t, e in zip(truth, estimate):
        t, e = np.asarray(t, dtype=float), np.asarray(e, dtype=float)
        if t.shape != e.shape:
            raise ShapeError(f"row shapes differ: {t.shape} vs {e.shape}")
        per_attr.append(np.mean((t - e) ** 2))
    return float(np.mean(per_attr))


def amplified_epsilon(epsilon: float, d: int) -> float:
    """Budget implied by sampling one of ``d`` attributes: ``ln(d (e^eps - 1) + 1)``."""
    epsilon = check_epsilon(epsilon)
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    return math.log(d * math.expm1(epsilon) + 1)


def _split_size(fraction: float, n: int, what: str) -> int:
    size = int(math.floor(fraction * n + 0.5))
    if size < 1 or size > n - 1:
        raise SplitError(f"{what} fraction {fraction} of n={n} leaves an empty group ({size} vs {n - size})")
    return size


def run_once(
    dataset: Dataset,
    mechanism: str,
    epsilon: float,
    phase1_fraction: float = 0.1,
    rng: RngStream | None = None,
    *,
    prior_fraction: float = 0.1,
    exact_kary: bool = True,
) -> MarginalTable:
    """Simulate one collection round and return the raw (unclamped) estimate.

    CORR_RR: a seeded shuffle puts the first ``round(phase1_fraction * n)``
    users in Phase I (SPL), the server picks p_y for every pair from the
    clamped Phase-I marginals, and the rest report through Phase II.
    RSRFD: the prior comes from SPL reports of a disjoint
    ``prior_fraction`` slice; the remaining users run RS+RFD.
    """
    mechanism = canonical_mechanism(mechanism)
    rng = rng if rng is not None else np.random.default_rng()
    x, dom, n = dataset.records, dataset.domains, dataset.n

    if mechanism == SPL:
        return spl_estimate(spl_perturb_batch(x, epsilon, dom, rng), epsilon, dom)
    if mechanism == RSFD:
        return rsfd_estimate(rsfd_perturb_batch(x, epsilon, dom, rng), epsilon, dom)

    perm = rng.permutation(n)
    if mechanism == RSRFD:
        cut = _split_size(prior_fraction, n, "prior")
        slice_reports = spl_perturb_batch(x[perm[:cut]], epsilon, dom, rng)
        prior = clamp_normalize(spl_estimate(slice_reports, epsilon, dom))
        reports = rsrfd_perturb_batch(x[perm[cut:]], epsilon, dom, prior, rng)
        return rsrfd_estimate(reports, epsilon, dom, prior)

    n1 = _split_size(phase1_fraction, n, "phase-I")
    phase1 = spl_perturb_batch(x[perm[:n1]], epsilon, dom, rng)
    marg1 = clamp_normalize(spl_estimate(phase1, epsilon, dom))
    py = infer_py_matrix(marg1, epsilon, n - n1, exact_kary=exact_kary)
    phase2 = corr_rr_phase2_batch(x[perm[n1:]], epsilon, dom, py, rng)
    return corr_rr_estimate(phase1, phase2, epsilon, dom)


@dataclass(frozen=True)
class SourceSpec:
    """A synthetic spec or a coded CSV (as written by ``synth``/``ingest``)."""

    synth: SynthSpec | None = None
    path: str | None = None
    name: str | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "SourceSpec":
        if "synth" in raw:
            return cls(synth=SynthSpec(**raw["synth"]), name=raw.get("name"))
        if "path" in raw or "file" in raw:
            path = raw.get("path", raw.get("file"))
            return cls(path=str(path), name=raw.get("name"))
        raise ValueError(f"source needs 'synth' or 'path': {raw}")

    def to_dict(self) -> dict:
        if self.synth is not None:
            out = {"synth": self.synth.to_dict()}
        else:
            out = {"path": self.path}
        if self.name:
            out["name"] = self.name
        return out

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.synth is not None:
            return f"rho={self.synth.rho:g}"
        return Path(self.path).stem

    def load(self, repetition: int | None = None) -> Dataset:
        if self.synth is not None:
            spec = self.synth
            if repetition is not None:
                seed = int(np.random.SeedSequence([spec.seed, repetition]).generate_state(1)[0])
                spec = replace(spec, seed=seed)
            return gen_synthetic(spec)
        return load_dataset(self.path)[0]


@dataclass
class ExperimentConfig:
    sources: list
    mechanisms: list
    epsilons: list
    phase1_fractions: list = field(default_factory=lambda: [0.1])
    repetitions: int = 200
    seed: int = 0
    clamp: bool = False
    prior_fraction: float = 0.1
    redraw_data: bool = False
    timing: bool = True
    exact_kary: bool = True

    def __post_init__(self):
        self.sources = [s if isinstance(s, SourceSpec) else SourceSpec.from_dict(s) for s in self.sources]
        self.mechanisms = [canonical_mechanism(m) for m in self.mechanisms]
        self.epsilons = [check_epsilon(e) for e in self.epsilons]
        self.phase1_fractions = [float(f) for f in self.phase1_fractions]
        if not (self.sources and self.mechanisms and self.epsilons and self.phase1_fractions):
            raise ValueError("sources, mechanisms, epsilons and phase1_fractions must be nonempty")
        if CORR_RR in self.mechanisms and any(not 0 < f < 1 for f in self.phase1_fractions):
            raise ValueError(f"phase1 fractions must lie in (0, 1): {self.phase1_fractions}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        if "source" in raw:
            raw["sources"] = [raw.pop("source")]
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["sources"] = [s.to_dict() for s in self.sources]
        return out


@dataclass(frozen=True)
class ResultRow:
    mechanism: str
    epsilon: float
    d: int
    k: int
    source: str
    phase1_fraction: float
    mse_mean: float
    mse_std: float
    runs: int
    wall_ms: float

    def as_csv(self) -> list:
        return [
            self.mechanism, f"{self.epsilon:g}", self.d, self.k, self.source,
            f"{self.phase1_fraction:g}", repr(self.mse_mean), repr(self.mse_std),
            self.runs, f"{self.wall_ms:.3f}",
        ]


@dataclass(frozen=True)
class _Cell:
    source_index: int
    mechanism: str
    epsilon: float
    fraction: float
    key: tuple


def _run_cell(cell: _Cell, config: ExperimentConfig, dataset: Dataset | None) -> tuple[list, float]:
    source = config.sources[cell.source_index]
    start = time.perf_counter()
    errors = []
    for r in range(config.repetitions):
        data = source.load(r) if config.redraw_data and source.synth is not None else dataset
        rng = rng_stream(config.seed, *cell.key, r)
        est = run_once(
            data, cell.mechanism, cell.epsilon, cell.fraction, rng,
            prior_fraction=config.prior_fraction, exact_kary=config.exact_kary,
        )
        if config.clamp:
            est = clamp_normalize(est)
        errors.append(mse_metric(true_marginals(data), est))
    return errors, (time.perf_counter() - start) * 1000.0


def _run_cell_star(args):
    return _run_cell(*args)


def run_experiment(config: ExperimentConfig, workers: int = 1) -> list[ResultRow]:
    """Run every grid cell ``config.repetitions`` times; rows come back in grid order.

    Row order: source, epsilon, phase-I fraction, mechanism (as listed in the
    config). Baselines ignore the fraction, so each baseline cell is computed
    once and repeated for every fraction.
    """
    datasets = [s.load() for s in config.sources]
    cells, layout = [], []
    seen = {}
    for si in range(len(config.sources)):
        for ei, eps in enumerate(config.epsilons):
            for fi, frac in enumerate(config.phase1_fractions):
                for mi, mech in enumerate(config.mechanisms):
                    fkey = fi if mech == CORR_RR else 0
                    key = (si, ei, mi, fkey)
                    if key not in seen:
                        seen[key] = len(cells)
                        frac_used = frac if mech == CORR_RR else config.phase1_fractions[0]
                        cells.append(_Cell(si, mech, eps, frac_used, key))
                    layout.append((seen[key], si, mech, eps, frac))

    jobs = [(c, config, datasets[c.source_index]) for c in cells]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_cell_star, jobs))
    else:
        outcomes = [_run_cell_star(j) for j in jobs]

    rows = []
    for ci, si, mech, eps, frac in layout:
        errors, wall = outcomes[ci]
        data = datasets[si]
        rows.append(ResultRow(
            mechanism=mech,
            epsilon=eps,
            d=data.d,
            k=data.uniform_k or max(data.domains),
            source=config.sources[si].label,
            phase1_fraction=frac,
            mse_mean=float(np.mean(errors)),
            mse_std=float(np.std(errors)),
            runs=len(errors),
            wall_ms=round(wall, 3) if config.timing else 0.0,
        ))
    return rows


def write_results(rows: list, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(row.as_csv())


def read_results(path) -> list[ResultRow]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            ResultRow(
                mechanism=r["mechanism"], epsilon=float(r["epsilon"]), d=int(r["d"]), k=int(r["k"]),
                source=r["source"], phase1_fraction=float(r["phase1_fraction"]),
                mse_mean=float(r["mse_mean"]), mse_std=float(r["mse_std"]),
                runs=int(r["runs"]), wall_ms=float(r["wall_ms"]),
            )
            for r in reader
        ]


def run_metadata(config: ExperimentConfig) -> dict:
    """Config echo plus the amplified budgets implied by attribute sampling (informational)."""
    datasets = [s.load() for s in config.sources]
    return {
        "config": config.to_dict(),
        "amplified_epsilon": [
            {"source": s.label, "d": ds.d, "epsilon": e, "epsilon_amplified": amplified_epsilon(e, ds.d)}
            for s, ds in zip(config.sources, datasets)
            for e in config.epsilons
        ],
        "note": "all mechanisms run at the nominal epsilon; amplified values are not used for tuning",
    }
