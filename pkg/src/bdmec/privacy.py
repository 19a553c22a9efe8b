"""Laplace-noised job counts and the two metrics used to judge them."""

from __future__ import annotations

import csv
import math
from typing import Mapping

import numpy as np

from . import _accel
from .model import PrivacyParams
_TINY = np.finfo(np.float64).tiny


class NonPositiveTrueValue(ValueError):
    pass


class UnknownTarget(KeyError):
    pass


def laplace_transform(u, scale_b):
    """Map uniforms on [-1/2, 1/2) to Laplace(0, scale_b) by inverse CDF."""
    return _accel.laplace_from_uniform(np.ascontiguousarray(u, dtype=np.float64), float(scale_b))


def laplace_sample(scale_b: float, rng: np.random.Generator, size=None):
    """One draw (or an array of ``size`` draws) from Laplace(0, scale_b)."""
    if not scale_b > 0:
        raise ValueError("scale_b must be > 0")
    if size is None:
        u = rng.random() - 0.5
        if u == 0.0:
            return 0.0
        tail = max(1.0 - 2.0 * abs(u), _TINY)
        return -scale_b * math.copysign(1.0, u) * math.log(tail)
    return laplace_transform(rng.random(size) - 0.5, scale_b)


def perturb_count(v: int, params: PrivacyParams, rng: np.random.Generator) -> int:
    noisy = v + laplace_sample(params.sensitivity / params.epsilon, rng)
    return max(0, int(np.rint(noisy)))


def perturb_counts(v, params: PrivacyParams, rng: np.random.Generator):
    """Vectorized :func:`perturb_count` over an integer array of any shape."""
    v = np.asarray(v, dtype=np.float64)
    noise = laplace_sample(params.sensitivity / params.epsilon, rng, size=v.size).reshape(v.shape)
    return np.maximum(np.rint(v + noise), 0).astype(np.int64)


def relative_error(v: float, v_prime: float) -> float:
    """|v - v'| / v as a percentage."""
    if not v > 0:
        raise NonPositiveTrueValue(f"true value must be positive, got {v!r}")
    return abs(v - v_prime) / v * 100.0


def mean_relative_error(v: int, params: PrivacyParams, trials: int, rng: np.random.Generator) -> float:
    noisy = perturb_counts(np.full(trials, v), params, rng)
    return float(np.mean(np.abs(v - noisy)) / v * 100.0)


def precision_experiment(true_counts: Mapping[str, int], target: str, params: PrivacyParams,
                         trials: int, rng: np.random.Generator) -> float:
    """Percentage of trials in which ``target`` keeps its true rank.

    Every worker's count is noised independently per trial. A trial where
    the target drops below its true rank is a false negative; one where it
    rises is neither and leaves the denominator. Ties rank the
    lexicographically smaller worker id first.
    """
    if target not in true_counts:
        raise UnknownTarget(target)
    if trials < 1:
        raise ValueError("trials must be ≥ 1")
    ids = sorted(true_counts)
    counts = np.array([true_counts[w] for w in ids], dtype=np.int64)
    t = ids.index(target)
    true_rank = 1 + int(np.sum(counts > counts[t])) + int(np.sum(counts[:t] == counts[t]))
    noisy = perturb_counts(np.broadcast_to(counts, (trials, len(ids))), params, rng)
    tp, fn, _ = _accel.rank_outcomes(np.ascontiguousarray(noisy), t, true_rank)
    if tp + fn == 0:
        return 100.0
    return 100.0 * tp / (tp + fn)


def privacy_sweep(true_counts: Mapping[str, int], epsilons, trials: int, seed: int,
                  sensitivity: float = 1.0):
    """Mean relative error and precision per (epsilon, worker).

    Each cell gets its own generator stream derived from ``seed``.
    """
    rows = []
    ids = sorted(true_counts)
    for ei, eps in enumerate(epsilons):
        params = PrivacyParams(float(eps), sensitivity)
        for wi, w in enumerate(ids):
            ss = np.random.SeedSequence([seed, ei, wi])
            r_rng, p_rng = (np.random.default_rng(s) for s in ss.spawn(2))
            rows.append(dict(
                epsilon=float(eps), worker_id=w,
                mean_R_percent=mean_relative_error(true_counts[w], params, trials, r_rng),
                P_percent=precision_experiment(true_counts, w, params, trials, p_rng),
                trials=trials, seed=seed))
    return rows


PRIVACY_COLUMNS = ["epsilon", "worker_id", "mean_R_percent", "P_percent", "trials", "seed"]


def write_privacy_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PRIVACY_COLUMNS)
        for r in rows:
            w.writerow([repr(r["epsilon"]), r["worker_id"], repr(r["mean_R_percent"]),
                        repr(r["P_percent"]), r["trials"], r["seed"]])
