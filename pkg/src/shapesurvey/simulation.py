"""Monte-Carlo study of constrained domain means under stratified sampling.

Random streams
--------------
All randomness derives from one integer seed through
``numpy.random.SeedSequence(seed, spawn_key=(stream, ...))`` feeding a
Philox (counter-based, 64-bit) generator:

* stream 0 -- population values,
* stream 1 -- the auxiliary stratification variable,
* stream 2 -- replication ``r`` uses ``spawn_key=(2, r)``,
* stream 3 -- jackknife grouping in replication ``r`` uses ``(3, r)``.

A replication's draws therefore do not depend on which worker runs it, and
sharded runs reproduce serial runs exactly.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cone import enumerate_valid_faces
from .constraints import ConstraintMatrix, DomainGrid, build_monotone, transform_by_weights
from .estimation import DomainEstimates, SampleData, constrained_estimate, domain_estimates
from .variance import (
    dagjk_replicates,
    linearized_variance,
    replicate_estimates,
    replicate_variance,
    wald_interval,
)

__all__ = [
    "Population",
    "PopulationSpec",
    "SimulationReport",
    "StratifiedDesign",
    "StudyConfig",
    "draw_sample",
    "face_selection_study",
    "generate_population",
    "mu_surface",
    "run_study",
    "shape_constraints",
    "stratify",
    "true_faces",
    "wmse",
]

POPULATION_STREAM = 0
DESIGN_STREAM = 1
REPLICATION_STREAM = 2
JACKKNIFE_STREAM = 3

SHAPES = ("x1", "double")


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def study_grid(D1: int, D2: int) -> DomainGrid:
    """Grid with factors ``(x2, x1)`` so that ``x1`` varies fastest.

    Domain ``d`` holds ``x1 = d % D1 + 1`` and ``x2 = d // D1 + 1``.
    """
    return DomainGrid((D2, D1))


def mu_surface(D1: int, D2: int) -> np.ndarray:
    """Limiting domain means on the integer grid, flattened ``x1`` fastest."""
    x2, x1 = np.meshgrid(np.arange(1, D2 + 1), np.arange(1, D1 + 1), indexing="ij")
    e = np.exp(0.5 + 2.0 * x2 / D2)
    return (np.sqrt(1.0 + 4.0 * x1 / D1) + 4.0 * e / (1.0 + e)).ravel()


def shape_constraints(shape: str, D1: int, D2: int) -> ConstraintMatrix:
    """``"x1"``: increasing in x1 only; ``"double"``: increasing in both."""
    grid = study_grid(D1, D2)
    if shape == "x1":
        return build_monotone(grid, [1])
    if shape == "double":
        return build_monotone(grid, [1, 0])
    raise ValueError(f"unknown shape {shape!r}")


@dataclass(frozen=True)
class PopulationSpec:
    D1: int = 6
    D2: int = 4
    N_d: int = 400
    sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.D1 < 1 or self.D2 < 1 or self.N_d < 1:
            raise ValueError("grid sizes and N_d must be positive")


@dataclass(frozen=True)
class Population:
    y: np.ndarray = field(repr=False)
    domain: np.ndarray = field(repr=False)
    mu: np.ndarray
    ybar: np.ndarray
    N_d: np.ndarray
    spec: PopulationSpec

    @property
    def N(self) -> int:
        return self.y.size

    @property
    def D(self) -> int:
        return self.mu.size


def generate_population(spec: PopulationSpec) -> Population:
    """Domain means from the monotone surface plus i.i.d. normal noise.

    The estimand is the realized population domain mean ``ybar``.
    """
    mu = mu_surface(spec.D1, spec.D2)
    D = mu.size
    domain = np.repeat(np.arange(D), spec.N_d)
    rng = _rng(spec.seed, POPULATION_STREAM)
    y = mu[domain] + spec.sigma * rng.standard_normal(domain.size)
    N_d = np.full(D, spec.N_d)
    ybar = np.bincount(domain, weights=y, minlength=D) / N_d
    return Population(y, domain, mu, ybar, N_d, spec)


@dataclass(frozen=True)
class StratifiedDesign:
    """Strata from ranks of ``nu = sigma * d / D + N(0, 1)``, SRSWOR within.

    ``d`` is the 1-based flattened domain index.
    """

    allocation: tuple = (60, 120, 120, 180)

    @property
    def H(self) -> int:
        return len(self.allocation)

    @property
    def n(self) -> int:
        return int(sum(self.allocation))

    def doubled(self) -> "StratifiedDesign":
        return StratifiedDesign(tuple(2 * a for a in self.allocation))


def stratify(population: Population, H: int, seed: int) -> np.ndarray:
    """Stratum label per population unit: ``H`` equal rank blocks of ``nu``."""
    N, D = population.N, population.D
    if N % H:
        raise ValueError(f"N={N} is not divisible into {H} equal strata")
    rng = _rng(seed, DESIGN_STREAM)
    d1 = population.domain + 1
    nu = population.spec.sigma * d1 / D + rng.standard_normal(N)
    ranks = np.empty(N, dtype=np.intp)
    ranks[np.argsort(nu, kind="stable")] = np.arange(N)
    return ranks // (N // H)


def draw_sample(population: Population, strata: np.ndarray, design: StratifiedDesign,
                rng: np.random.Generator) -> SampleData:
    """Stratified simple random sample without replacement."""
    labels = np.arange(design.H)
    picks, pis, sts = [], [], []
    for h, n_h in zip(labels, design.allocation):
        members = np.flatnonzero(strata == h)
        N_h = members.size
        if n_h > N_h:
            raise ValueError(f"allocation {n_h} exceeds stratum {h} size {N_h}")
        chosen = np.sort(rng.choice(members, size=n_h, replace=False))
        picks.append(chosen)
        pis.append(np.full(n_h, n_h / N_h))
        sts.append(np.full(n_h, h))
    idx = np.concatenate(picks)
    return SampleData(
        y=population.y[idx],
        pi=np.concatenate(pis),
        domain=population.domain[idx],
        stratum=np.concatenate(sts),
        design="stratified_srswor",
    )


def wmse(estimates, truth, N_d) -> float:
    """Average of ``(est - truth)' diag(N_d / N) (est - truth)`` over rows."""
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    w = np.asarray(N_d, dtype=float)
    w = w / w.sum()
    err = est - np.asarray(truth, dtype=float)
    return float(np.mean((err**2) @ w))


def true_faces(mu, r, A: ConstraintMatrix) -> Optional[list]:
    """Face sets carrying the polar projection of the limiting means.

    Strictly feasible means give ``[()]``; otherwise the faces are
    enumerated (only possible for ``m <= 20``, else ``None``).
    """
    mu = np.asarray(mu, dtype=float)
    if np.all(A.entries @ mu > 0):
        return [()]
    if A.m > 20:
        return None
    r = np.asarray(r, dtype=float) / np.sum(r)
    _, edges = transform_by_weights(A, r)
    return [f for f, _, _ in enumerate_valid_faces(np.sqrt(r) * mu, edges)]


@dataclass
class StudyConfig:
    """One simulation scenario.

    ``shapes`` lists constrained estimators to run next to the Hájek means.
    ``dagjk`` lists jackknife group counts (empty to skip).
    """

    D1: int = 6
    D2: int = 4
    N_d: int = 400
    sigma: float = 1.0
    allocation: tuple = (60, 120, 120, 180)
    shapes: tuple = ("x1", "double")
    reps: int = 1000
    seed: int = 0
    linearization: bool = True
    dagjk: tuple = ()
    level: float = 0.95
    threads: int = 1

    def __post_init__(self):
        self.allocation = tuple(int(a) for a in self.allocation)
        self.shapes = tuple(self.shapes)
        self.dagjk = tuple(int(g) for g in self.dagjk)
        for s in self.shapes:
            if s not in SHAPES:
                raise ValueError(f"unknown shape {s!r}")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if not 0 < self.level < 1:
            raise ValueError("level must lie in (0, 1)")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")

    @classmethod
    def from_dict(cls, d: dict) -> "StudyConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["allocation"] = list(self.allocation)
        out["shapes"] = list(self.shapes)
        out["dagjk"] = list(self.dagjk)
        return out


@dataclass
class EstimatorSummary:
    """Per-domain Monte-Carlo summaries for one estimator."""

    name: str
    mean: np.ndarray
    p025: np.ndarray
    p975: np.ndarray
    mc_variance: np.ndarray
    wmse: float
    mean_variance: dict = field(default_factory=dict)
    coverage: dict = field(default_factory=dict)
    face_counts: dict = field(default_factory=dict)
    bad_face_rate: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "wmse": self.wmse,
            "mean": self.mean.tolist(),
            "p025": self.p025.tolist(),
            "p975": self.p975.tolist(),
            "mc_variance": self.mc_variance.tolist(),
            "mean_variance": {k: v.tolist() for k, v in self.mean_variance.items()},
            "coverage": {k: v.tolist() for k, v in self.coverage.items()},
            "face_counts": {_face_key(k): v for k, v in sorted(self.face_counts.items())},
            "bad_face_rate": self.bad_face_rate,
        }


def _face_key(face) -> str:
    return "{" + ",".join(str(j + 1) for j in face) + "}"


@dataclass
class SimulationReport:
    config: StudyConfig
    ybar: np.ndarray
    N_d: np.ndarray
    estimators: dict

    def wmse_table(self) -> dict:
        return {k: v.wmse for k, v in self.estimators.items()}

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "ybar": self.ybar.tolist(),
            "N_d": self.N_d.tolist(),
            "estimators": {k: v.to_dict() for k, v in self.estimators.items()},
        }


def _one_replication(r, config, population, strata, design, constraints, true_face_sets):
    rng = _rng(config.seed, REPLICATION_STREAM, r)
    sample = draw_sample(population, strata, design, rng)
    D = population.D
    est = domain_estimates(sample, D)
    out = {"unconstrained": {"theta": est.hajek, "face": None}}
    for shape, A in constraints.items():
        ce = constrained_estimate(est, A)
        terminal = ce.projection.face if ce.projection is not None else ()
        out[shape] = {"theta": ce.theta, "face": ce.face, "terminal": terminal}
    if config.linearization:
        out["unconstrained"]["lin"] = linearized_variance(sample, est).variance
        for shape, A in constraints.items():
            out[shape]["lin"] = linearized_variance(sample, est, out[shape]["face"], A).variance
    for G in config.dagjk:
        scheme = dagjk_replicates(sample, G, np.random.SeedSequence(config.seed, spawn_key=(JACKKNIFE_STREAM, r, G)))
        for name in out:
            A = constraints.get(name)
            reps = replicate_estimates(sample, scheme, D, A)
            out[name][f"dagjk{G}"] = replicate_variance(out[name]["theta"], reps, scheme.coefficients)
    return out


def run_study(config: StudyConfig, progress=None) -> SimulationReport:
    """Run ``config.reps`` replications and summarize.

    The population and strata are fixed across replications; each
    replication draws a fresh stratified sample.  Results are identical for
    any ``config.threads``.
    """
    spec = PopulationSpec(config.D1, config.D2, config.N_d, config.sigma, config.seed)
    population = generate_population(spec)
    design = StratifiedDesign(config.allocation)
    strata = stratify(population, design.H, config.seed)
    constraints = {s: shape_constraints(s, config.D1, config.D2) for s in config.shapes}
    r = population.N_d / population.N_d.sum()
    true_face_sets = {s: true_faces(population.mu, r, A) for s, A in constraints.items()}

    def task(i):
        res = _one_replication(i, config, population, strata, design, constraints, true_face_sets)
        if progress is not None:
            progress(i)
        return res

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(task, range(config.reps)))
    else:
        results = [task(i) for i in range(config.reps)]
    return _summarize(config, population, results, true_face_sets)


def _summarize(config, population, results, true_face_sets) -> SimulationReport:
    ybar, N_d = population.ybar, population.N_d
    methods = (["lin"] if config.linearization else []) + [f"dagjk{G}" for G in config.dagjk]
    summaries = {}
    for name in results[0]:
        theta = np.array([res[name]["theta"] for res in results])
        mc_var = theta.var(axis=0, ddof=1) if len(results) > 1 else np.zeros(theta.shape[1])
        s = EstimatorSummary(
            name=name,
            mean=theta.mean(axis=0),
            p025=np.percentile(theta, 2.5, axis=0),
            p975=np.percentile(theta, 97.5, axis=0),
            mc_variance=mc_var,
            wmse=wmse(theta, ybar, N_d),
        )
        for meth in methods:
            v = np.array([res[name][meth] for res in results])
            lo, hi = wald_interval(theta, v, config.level)
            s.mean_variance[meth] = v.mean(axis=0)
            s.coverage[meth] = ((lo <= ybar) & (ybar <= hi)).mean(axis=0)
        if name != "unconstrained":
            counts: dict = {}
            for res in results:
                f = tuple(res[name]["terminal"])
                counts[f] = counts.get(f, 0) + 1
            s.face_counts = counts
            good = true_face_sets.get(name)
            if good is not None:
                good = set(good)
                bad = sum(c for f, c in counts.items() if f not in good)
                s.bad_face_rate = bad / len(results)
        summaries[name] = s
    return SimulationReport(config, ybar, N_d, summaries)


@dataclass(frozen=True)
class FaceFrequency:
    """Terminal-face tallies on a sub-grid and the rate outside the true faces."""

    counts: dict
    true_faces: list
    bad_rate: float
    reps: int


def face_selection_study(config: StudyConfig, x1_levels: Sequence[int], x2_levels: Sequence[int],
                         shape: str = "double", allocation: Optional[Sequence[int]] = None) -> FaceFrequency:
    """How often a sub-grid's sample picks a face the limiting means do not.

    The sub-grid is the product of the given 1-based ``x1`` and ``x2``
    levels; its domains keep their sampled units and everything else is
    discarded.  True faces are found by exhaustive enumeration.
    """
    spec = PopulationSpec(config.D1, config.D2, config.N_d, config.sigma, config.seed)
    population = generate_population(spec)
    design = StratifiedDesign(tuple(allocation) if allocation is not None else config.allocation)
    strata = stratify(population, design.H, config.seed)

    x1_levels, x2_levels = list(x1_levels), list(x2_levels)
    sub = [(j - 1) * config.D1 + (i - 1) for j in x2_levels for i in x1_levels]
    remap = -np.ones(population.D, dtype=np.intp)
    remap[sub] = np.arange(len(sub))
    A = shape_constraints(shape, len(x1_levels), len(x2_levels))
    mu = population.mu[sub]
    r = population.N_d[sub] / population.N_d[sub].sum()
    _, edges_mu = transform_by_weights(A, r)
    good = [f for f, _, _ in enumerate_valid_faces(np.sqrt(r) * mu, edges_mu)]

    counts: dict = {}
    for i in range(config.reps):
        rng = _rng(config.seed, REPLICATION_STREAM, i)
        s = draw_sample(population, strata, design, rng)
        keep = remap[s.domain] >= 0
        sample = SampleData(s.y[keep], s.pi[keep], remap[s.domain[keep]], s.stratum[keep],
                            design=s.design)
        est = domain_estimates(sample, len(sub))
        ce = constrained_estimate(est, A)
        f = ce.projection.face if ce.projection is not None else ()
        counts[f] = counts.get(f, 0) + 1
    goodset = set(good)
    bad = sum(c for f, c in counts.items() if f not in goodset)
    return FaceFrequency(counts, good, bad / config.reps, config.reps)
