"""Finite-shot readout, bootstrap score estimates and classical baselines.

Random numbers come from numpy's PCG64 bit generator.  Independent streams
are derived with ``SeedSequence(seed).spawn``, so every result is a pure
function of its seed.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import NamedTuple

import numpy as np

from .errors import InvalidArgument
from .protocol import AngleSet, _check_K, classical_bound
from .pulses import positive_levels, run_protocol
from .spin import QuditState, system_for_dimension

N_BOOTSTRAP = 1000
SIMPLEX_TOL = 1e-9


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(int(seed)))


def _check_simplex(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0 or np.any(p < -SIMPLEX_TOL) or abs(p.sum() - 1) > SIMPLEX_TOL:
        raise InvalidArgument("probabilities must be a non-negative vector summing to 1")
    p = np.clip(p, 0, None)
    return p / p.sum()


def sample_shots(probabilities, n: int, seed) -> np.ndarray:
    """Multinomial histogram of ``n`` projective readouts."""
    if int(n) < 1:
        raise InvalidArgument(f"need at least one shot, got {n}")
    return _rng(seed).multinomial(int(n), _check_simplex(probabilities))


@dataclass
class ShotRecord:
    """Per-angle outcome histograms over the d z-basis levels (ascending m)."""

    counts: dict
    shots_per_angle: int
    seed: int | None = None
    positive: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.counts = {int(k): np.asarray(v, dtype=np.int64) for k, v in sorted(self.counts.items())}
        if not self.counts:
            raise InvalidArgument("shot record has no angles")
        sizes = {h.size for h in self.counts.values()}
        if len(sizes) != 1:
            raise InvalidArgument("histograms differ in length")
        for k, h in self.counts.items():
            if h.sum() != self.shots_per_angle or np.any(h < 0):
                raise InvalidArgument(f"histogram {k} does not sum to {self.shots_per_angle}")

    @property
    def d(self) -> int:
        return next(iter(self.counts.values())).size

    def histograms(self) -> np.ndarray:
        return np.stack([self.counts[k] for k in sorted(self.counts)])


def sample_protocol(target: QuditState, angles: AngleSet, shots: int, seed: int,
                    subspace=None) -> ShotRecord:
    """Simulate the protocol and draw ``shots`` readouts at each angle.

    Angle ``k`` uses the ``k``-th child of ``SeedSequence(seed)``.
    """
    points = run_protocol(target, angles, subspace)
    children = np.random.SeedSequence(seed).spawn(len(points))
    counts = {k: sample_shots(p.probabilities, shots, child)
              for k, (p, child) in enumerate(zip(points, children))}
    return ShotRecord(counts, int(shots), int(seed), positive_levels(target.system, subspace))


@dataclass(frozen=True)
class ScoreEstimate:
    point: float
    ci_low: float
    ci_high: float
    n_bootstrap: int
    shots_per_angle: int
    seed: int | None = None

    @property
    def sigma(self) -> float:
        return (self.ci_high - self.ci_low) / 4

    def to_dict(self) -> dict:
        return {"point": self.point, "ci_low": self.ci_low, "ci_high": self.ci_high,
                "n_bootstrap": self.n_bootstrap, "shots_per_angle": self.shots_per_angle,
                "seed": self.seed}


def estimate_score(records: ShotRecord, d: int | None = None, n_bootstrap: int = N_BOOTSTRAP,
                   seed: int | None = None) -> ScoreEstimate:
    """Score estimate with a 2 sigma bootstrap interval.

    The point estimate averages, over angles, the fraction of outcomes in
    the positive half of the levels.  Each bootstrap replicate redraws
    every histogram multinomially at its observed frequencies.

    Parameters
    ----------
    records : ShotRecord
    d : int, optional
        Dimension check; defaults to the histogram length.
    n_bootstrap : int
    seed : int, optional
        Bootstrap seed; defaults to the record's seed (or 0).
    """
    d = records.d if d is None else int(d)
    if d != records.d:
        raise InvalidArgument(f"records have {records.d} outcomes, expected {d}")
    if d % 2:
        raise InvalidArgument("score estimation needs an even number of outcomes")
    mask = records.positive
    if mask is None:
        mask = positive_levels(system_for_dimension(d))
    H = records.histograms()
    n = records.shots_per_angle
    point = float(np.mean(H[:, mask].sum(axis=1) / n))
    base = records.seed if seed is None else seed
    rng = _rng(np.random.SeedSequence([0 if base is None else int(base), 1]))
    freqs = H / n
    reps = np.zeros(n_bootstrap)
    for p in freqs:
        draws = rng.multinomial(n, p, size=n_bootstrap)
        reps += draws[:, mask].sum(axis=1) / n
    reps /= len(freqs)
    sd = float(reps.std(ddof=1)) if n_bootstrap > 1 else 0.0
    return ScoreEstimate(point, point - 2 * sd, point + 2 * sd, n_bootstrap, n, records.seed)


class FidelityBound(NamedTuple):
    value: float  # clamped to [0, 1]
    raw: float


def fidelity_lower_bound(score: float, K: int) -> FidelityBound:
    """Lower bound on the fidelity with the ideal cat implied by ``score``.

    F >= (2P - 1) / (2^-(K-1) binom(K-1, (K-1)/2)).
    """
    K = _check_K(K)
    raw = (2 * score - 1) / (comb(K - 1, (K - 1) // 2) / 2 ** (K - 1))
    return FidelityBound(float(min(max(raw, 0.0), 1.0)), float(raw))


# --------------------------------------------------------------------------
# classical Monte Carlo


class ClassicalMC(NamedTuple):
    max_score: Fraction
    histogram: np.ndarray  # histogram[j] = samples scoring j / K
    n_samples: int


def _admissible_general(rng: np.random.Generator, n: int, K: int) -> np.ndarray:
    """Rejection-sample sorted angle sets obeying the half-way partner condition."""
    out = np.empty((0, K))
    idx = (np.arange(K) + (K - 1) // 2) % K
    while len(out) < n:
        a = np.sort(rng.uniform(0, 2 * np.pi, (2 * (n - len(out)) + 16, K)), axis=1)
        ok = np.all(np.mod(a[:, idx] - a, 2 * np.pi) <= np.pi, axis=1)
        out = np.vstack([out, a[ok]])
    return out[:n]


def classical_mc(K: int, n_samples: int, seed: int) -> ClassicalMC:
    """Scores of classical gyroscopes over random phases and admissible angle sets.

    Each sample draws an initial phase phi0 and one of three angle
    families: the uniform grid, a uniform grid with every angle jittered
    inside its pi/(2K) box, or a general admissible set.
    """
    K = _check_K(K)
    if int(n_samples) < 1:
        raise InvalidArgument("n_samples must be at least 1")
    n = int(n_samples)
    rng = _rng(seed)
    family = rng.integers(0, 3, n)
    phi0 = rng.uniform(0, 2 * np.pi, n)
    grid = 2 * np.pi * np.arange(K) / K
    angles = np.tile(grid, (n, 1))
    jit = family == 1
    angles[jit] += rng.uniform(-np.pi / (2 * K), np.pi / (2 * K), (jit.sum(), K))
    gen = family == 2
    if gen.any():
        angles[gen] = _admissible_general(rng, int(gen.sum()), K)
    hits = (np.cos(phi0[:, None] + angles) >= 0).sum(axis=1)
    hist = np.bincount(hits, minlength=K + 1)
    best = Fraction(int(hits.max()), K)
    if best > classical_bound(K):
        raise AssertionError(f"classical sample scored {best} above the bound")
    return ClassicalMC(best, hist, n)


# --------------------------------------------------------------------------
# files


def shots_to_csv(record: ShotRecord) -> str:
    system = system_for_dimension(record.d)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["angle_index", "outcome_m", "count"])
    for k, h in record.counts.items():
        for m, c in zip(system.m, h):
            w.writerow([k, str(Fraction(m).limit_denominator(2)), int(c)])
    return buf.getvalue()


def shots_from_csv(text: str, seed: int | None = None) -> ShotRecord:
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows or set(rows[0]) != {"angle_index", "outcome_m", "count"}:
        raise InvalidArgument("shot CSV needs columns angle_index,outcome_m,count")
    ms = sorted({Fraction(r["outcome_m"]) for r in rows})
    d = len(ms)
    pos = {m: i for i, m in enumerate(ms)}
    counts: dict = {}
    for r in rows:
        counts.setdefault(int(r["angle_index"]), np.zeros(d, np.int64))[pos[Fraction(r["outcome_m"])]] += int(r["count"])
    totals = {int(h.sum()) for h in counts.values()}
    if len(totals) != 1:
        raise InvalidArgument("angles have different shot totals")
    return ShotRecord(counts, totals.pop(), seed)


def estimate_to_json(est: ScoreEstimate) -> str:
    return json.dumps(est.to_dict(), indent=2)
