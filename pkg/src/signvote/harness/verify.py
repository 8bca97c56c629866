"""Monte Carlo and grid checks of the tail bounds and convergence rates.

Each suite returns a :class:`SuiteReport`; a failed check is an entry with
``passed=False``, never an exception.  Checks whose point is to show a bound
*failing* (the bimodal counterexample) are marked ``expect_violation`` and
pass when the violation is observed.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import norm

from .. import bounds
from ..aggregation import vote_outcome_distribution
from ..codec import take_sign
from ..oracles import CRITICAL_SNR, NoiseModel, bimodal_counterexample
from .config import ExperimentConfig, parse_adversaries
from .experiment import run_experiment

SUITES = ("lemma1", "star", "theorem1", "theorem2")

LEMMA1_SNRS = (0.1, 0.5, 1.0, CRITICAL_SNR, 2.0, 5.0)
STAR_WORKERS = (1, 3, 9, 27)
STAR_ALPHAS = (0.0, 1 / 9, 1 / 3)
STAR_SNRS = (0.5, 1.0, 2.0)


@dataclass
class Check:
    name: str
    params: dict
    observed: float
    limit: float
    passed: bool
    expect_violation: bool = False


@dataclass
class SuiteReport:
    suite: str
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, params, observed, limit, ok, expect_violation=False) -> Check:
        c = Check(name, params, float(observed), float(limit), bool(ok), expect_violation)
        self.checks.append(c)
        return c

    def as_dict(self) -> dict:
        return {"suite": self.suite, "passed": self.passed, "checks": [asdict(c) for c in self.checks]}


def sign_flip_rate(noise: NoiseModel, S: float, trials: int, rng) -> float:
    """Empirical P[sign(g + noise) != sign(g)] with g = S * sigma > 0."""
    g = S * float(noise.std(1)[0])
    draws = g + noise.sample(rng, trials)
    return float(np.mean(take_sign(draws) != 1))


def stderr(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def lemma1_suite(trials: int = 10**6, seed: int = 0, snrs=LEMMA1_SNRS) -> SuiteReport:
    rep = SuiteReport("lemma1")
    rng = np.random.default_rng(seed)
    for family in ("gaussian", "uniform"):
        noise = NoiseModel(family, 1.0)
        for S in snrs:
            emp = sign_flip_rate(noise, S, trials, rng)
            se = stderr(emp, trials)
            bound = bounds.lemma1_bound(S)
            rep.add("flip_rate<=bound", {"noise": family, "S": S, "trials": trials},
                    emp, bound + 4 * se, emp <= bound + 4 * se)
            if family == "gaussian":
                exact = float(norm.cdf(-S))
                tol = 4 * stderr(exact, trials)
                rep.add("flip_rate~Phi(-S)", {"noise": family, "S": S, "trials": trials},
                        abs(emp - exact), tol, abs(emp - exact) <= tol)
    obj = bimodal_counterexample()
    g = obj.gradient(np.zeros(1))[0]
    S = g / float(obj.sigma()[0])
    flips = np.mean(take_sign(g + obj.noise.sample(rng, trials)) != 1)
    rep.add("bimodal_flip_rate>bound", {"noise": "bimodal_counterexample", "S": S, "trials": trials},
            flips, bounds.lemma1_bound(S), flips > bounds.lemma1_bound(S), expect_violation=True)
    return rep


def star_grid(workers=STAR_WORKERS, alphas=STAR_ALPHAS, snrs=STAR_SNRS):
    """Yield (M, nominal alpha, realized alpha, S) with floor(alpha*M) adversaries."""
    for M in workers:
        for alpha in alphas:
            realized = math.floor(alpha * M + 1e-9) / M
            for S in snrs:
                yield M, alpha, realized, S


def star_suite() -> SuiteReport:
    rep = SuiteReport("star")
    for M, alpha, realized, S in star_grid():
        p = 1.0 - bounds.lemma1_bound(S)
        exact = vote_outcome_distribution(M, realized, p, "invert")
        bound = bounds.vote_failure_bound(M, realized, S)
        rep.add("exact_failure<=star_bound",
                {"M": M, "alpha": alpha, "alpha_realized": realized, "S": S, "p": p},
                exact, bound, exact <= bound)
    for S in np.logspace(-3, 3, 241):
        eps = bounds.epsilon_lower_bound(S)
        lhs = 1.0 / (4.0 * eps * eps) - 1.0
        rep.add("epsilon_step", {"S": float(S)}, lhs, 4.0 / S**2, bounds.epsilon_step_holds(S))
    return rep


def theorem1_suite(dim: int = 100, rounds: int = 10**4, seeds: int = 30) -> SuiteReport:
    """Single worker, batch 1, theorem-1 learning rate on the noisy quadratic."""
    rep = SuiteReport("theorem1")
    means, rhs = [], None
    for seed in range(seeds):
        cfg = ExperimentConfig(dim=dim, workers=1, rounds=rounds, seed=seed, schedule="theorem1")
        res = run_experiment(cfg)
        means.append(res.summary["mean_mixed_norm"])
        rhs = res.summary["theorem1_rhs"]
    avg = float(np.mean(means))
    rep.add("mean_mixed_norm<=theorem1_rhs", {"dim": dim, "rounds": rounds, "seeds": seeds}, avg, rhs, avg <= rhs)
    return rep


def theorem2_suite(dim: int = 100, rounds: int = 100, workers: int = 9, seeds: int = 10,
                   adversaries=("", "3 invert")) -> SuiteReport:
    """Majority vote with batch size K and the theorem-2 learning rate."""
    rep = SuiteReport("theorem2")
    for adv in adversaries:
        l1, rhs, alpha = [], None, 0.0
        for seed in range(seeds):
            cfg = ExperimentConfig(dim=dim, workers=workers, rounds=rounds, seed=seed, schedule="theorem2",
                                   adversaries=parse_adversaries(adv))
            res = run_experiment(cfg)
            l1.append(res.summary["mean_grad_l1"])
            rhs, alpha = res.summary["theorem2_rhs"], cfg.alpha
        lhs = float(np.mean(l1)) ** 2
        rep.add("mean_l1_squared<=theorem2_rhs",
                {"dim": dim, "rounds": rounds, "workers": workers, "alpha": alpha, "seeds": seeds},
                lhs, rhs, lhs <= rhs)
    return rep


def verify_bounds(suite: str, **kwargs) -> SuiteReport:
    runners = {"lemma1": lemma1_suite, "star": star_suite, "theorem1": theorem1_suite, "theorem2": theorem2_suite}
    if suite not in runners:
        raise ValueError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    return runners[suite](**kwargs)
