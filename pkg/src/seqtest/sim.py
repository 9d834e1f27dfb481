"""Seeded Monte Carlo for empirical operating characteristics.

Reproducibility contract: trial t draws from a dedicated substream derived
from (seed, t), so results do not depend on execution order and any two
runners given the same seed and trial index see the same observations.
That per-trial common-random-numbers coupling is what makes the
plan-versus-baseline sample-count contrasts sharp at desk-scale trial
counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UnsupportedModelError
from .plans import MultiHypPlan
from .sprt import SprtSpec

__all__ = ["SimReport", "CompareReport", "simulate", "compare"]

_SPRT_CHUNK = 64
_SPRT_MAX_DRAWS = 10_000_000  # safety on a runaway uncapped walk


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(trial,))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class SimReport:
    theta: float
    trials: int
    seed: int
    accept_freq: tuple[float, ...]
    accept_se: tuple[float, ...]
    asn: float
    asn_se: float
    stop_percentiles: dict[int, float]
    max_samples: int
    forced_rate: float = 0.0


def _summarize(theta, trials, seed, accepted, nstop, n_hyp, forced) -> SimReport:
    freq = tuple(float(np.mean(accepted == i)) for i in range(n_hyp))
    se = tuple(float(np.sqrt(f * (1.0 - f) / trials)) for f in freq)
    pct = {q: float(np.percentile(nstop, q, method="inverted_cdf"))
           for q in (50, 90, 99)}
    return SimReport(
        theta=float(theta), trials=trials, seed=seed,
        accept_freq=freq, accept_se=se,
        asn=float(nstop.mean()),
        asn_se=float(nstop.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0,
        stop_percentiles=pct,
        max_samples=int(nstop.max()),
        forced_rate=float(np.mean(forced)) if forced is not None else 0.0,
    )


def _simulate_plan(plan: MultiHypPlan, theta, trials, seed) -> SimReport:
    model = plan.model
    model.validate_theta(theta)
    stage_ns = plan.stage_ns
    n_last = stage_ns[-1]
    accepted = np.empty(trials, dtype=np.int64)
    nstop = np.empty(trials, dtype=np.int64)
    for t in range(trials):
        rng = _trial_rng(seed, t)
        cums = np.cumsum(model.draw(rng, n_last, theta))
        for idx, rule in enumerate(plan.stages):
            d = rule.decision_for_sum(int(cums[rule.n - 1]))
            if d:
                accepted[t] = d - 1
                nstop[t] = rule.n
                break
        else:
            raise DomainError("closed plan reached its last stage undecided")
    return _summarize(theta, trials, seed, accepted, nstop, plan.m, None)


def _simulate_sprt(spec: SprtSpec, theta, trials, seed) -> SimReport:
    spec.model.validate_theta(theta)
    log_a, log_b = spec.log_a, spec.log_b
    accepted = np.empty(trials, dtype=np.int64)
    nstop = np.empty(trials, dtype=np.int64)
    forced = np.zeros(trials, dtype=bool)
    for t in range(trials):
        rng = _trial_rng(seed, t)
        llr = 0.0
        consumed = 0
        while True:
            chunk = _SPRT_CHUNK
            if spec.cap is not None:
                chunk = min(chunk, spec.cap - consumed)
            xs = spec.model.draw(rng, chunk, theta)
            cs = llr + np.cumsum(spec.increments(xs))
            hit = (cs >= log_a) | (cs <= log_b)
            if hit.any():
                j = int(np.argmax(hit))
                accepted[t] = 1 if cs[j] >= log_a else 0
                nstop[t] = consumed + j + 1
                break
            llr = float(cs[-1])
            consumed += chunk
            if spec.cap is not None and consumed >= spec.cap:
                accepted[t] = 0 if llr <= 0.0 else 1
                nstop[t] = spec.cap
                forced[t] = True
                break
            if consumed >= _SPRT_MAX_DRAWS:
                raise DomainError(
                    f"sequential walk still undecided after {consumed} draws"
                )
    return _summarize(theta, trials, seed, accepted, nstop, 2, forced)


def simulate(runner, theta: float, trials: int, seed: int) -> SimReport:
    """Empirical acceptance, sample-count, and stopping summary for one mean."""
    if trials < 1:
        raise DomainError("trials must be at least 1")
    if isinstance(runner, MultiHypPlan):
        return _simulate_plan(runner, theta, trials, seed)
    if isinstance(runner, SprtSpec):
        return _simulate_sprt(runner, theta, trials, seed)
    raise UnsupportedModelError(f"cannot simulate runner of type {type(runner).__name__}")


@dataclass
class CompareReport:
    names: tuple[str, ...]
    thetas: tuple[float, ...]
    trials: int
    seed: int
    rows: list  # (name, SimReport), grid-major order

    def to_csv(self) -> str:
        n_hyp = max(len(rep.accept_freq) for _, rep in self.rows)
        cols = ["runner", "theta", "trials", "seed"]
        cols += [f"accept_h{i}" for i in range(n_hyp)]
        cols += [f"se_h{i}" for i in range(n_hyp)]
        cols += ["asn", "asn_se", "stop_p50", "stop_p90", "stop_p99",
                 "max_samples", "forced_rate"]
        lines = [",".join(cols)]
        for name, rep in self.rows:
            vals = [name, repr(rep.theta), str(rep.trials), str(rep.seed)]
            freq = list(rep.accept_freq) + [float("nan")] * (n_hyp - len(rep.accept_freq))
            ses = list(rep.accept_se) + [float("nan")] * (n_hyp - len(rep.accept_se))
            vals += [repr(float(v)) for v in freq]
            vals += [repr(float(v)) for v in ses]
            vals += [repr(rep.asn), repr(rep.asn_se),
                     repr(rep.stop_percentiles[50]), repr(rep.stop_percentiles[90]),
                     repr(rep.stop_percentiles[99]), str(rep.max_samples),
                     repr(rep.forced_rate)]
            lines.append(",".join(vals))
        return "\n".join(lines) + "\n"


def compare(runners, theta_grid, trials: int, seed: int, names=None) -> CompareReport:
    """Side-by-side empirical summaries under common random numbers.

    Every runner replays the same per-trial substreams, so at each grid
    point the runners face identical observation sequences.
    """
    runners = list(runners)
    if names is None:
        names = [f"runner_{i+1}" for i in range(len(runners))]
    names = [str(x) for x in names]
    if len(names) != len(runners):
        raise DomainError("one name per runner required")
    thetas = [float(t) for t in theta_grid]
    rows = []
    for theta in thetas:
        for name, runner in zip(names, runners):
            rows.append((name, simulate(runner, theta, trials, seed)))
    return CompareReport(names=tuple(names), thetas=tuple(thetas),
                         trials=trials, seed=seed, rows=rows)
