"""Construction and execution of multistage test plans.

A plan partitions the parameter line into ``m`` hypotheses by ``m - 1``
indifference zones ``(zone_lo[i], zone_hi[i])``.  At each stage the sample
mean is compared against per-stage acceptance windows derived from the
confidence limits: hypothesis ``i`` (counting from 0, lowest parameter
range first) is accepted at stage ``l`` when the decision variable equals
``i + 1``, i.e. when the mean falls in the half-open window
``(g[l][i], f[l][i+1]]``.

Window edges come from three support sets per zone boundary ``i``:

* the reject-low set, where the lower limit at per-stage level
  ``zeta * base_alphas[i]`` clears ``zone_lo[i]``;
* the accept set, where the upper limit at level ``zeta * base_betas[i]``
  drops below ``zone_hi[i]``;
* their intersection, the tie region, where both crossings hold and a
  preset policy splits the window at a cut value ``c``.

The one-sided two-hypothesis case recovers the classical sequential rule:
continue until the lower limit clears ``theta0`` (reject) or the upper
limit drops below ``theta1`` (accept), with the likelihood-ratio tie rule
by default.

Plans are closed: the final stage size is chosen (or validated) so that
every support point falls in some window, hence the sample size never
exceeds ``stage_ns[-1]``.  For fully sequential one-sided plans,
``sample_bound`` gives the analytic cap derived from the large-deviation
rate at the zone midpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .conflimits import ExactLimits, ChernoffLimits, ApproxLimits, family_by_tag
from .errors import DomainError, InfeasibleDesignError, StreamExhaustedError
from .models import Bernoulli, Poisson, _count_floor

__all__ = [
    "TIEBREAK_LIKELIHOOD_RATIO",
    "TIEBREAK_ALWAYS_ACCEPT",
    "TIEBREAK_ALWAYS_REJECT",
    "C_POLICY_SUPPORT_MIDPOINT",
    "C_POLICY_ZONE_MIDPOINT",
    "StageRule",
    "MultiHypPlan",
    "OneSidedPlan",
    "TestOutcome",
    "sample_bound",
    "build_stage_rule",
    "build_thresholds",
    "build_multihyp_plan",
    "build_one_sided_plan",
    "stage_schedule",
    "decision_variable",
    "run_plan",
]

TIEBREAK_LIKELIHOOD_RATIO = "likelihood-ratio"
TIEBREAK_ALWAYS_ACCEPT = "always-accept"
TIEBREAK_ALWAYS_REJECT = "always-reject"
_TIEBREAKS = (TIEBREAK_LIKELIHOOD_RATIO, TIEBREAK_ALWAYS_ACCEPT, TIEBREAK_ALWAYS_REJECT)

C_POLICY_SUPPORT_MIDPOINT = "support-midpoint"
C_POLICY_ZONE_MIDPOINT = "zone-midpoint"
_C_POLICIES = (C_POLICY_SUPPORT_MIDPOINT, C_POLICY_ZONE_MIDPOINT)

_POISSON_SCAN_CAP = 10_000_000


@dataclass(frozen=True)
class StageRule:
    """Decision thresholds of one stage, in both mean and sum-count units.

    ``windows[i]`` (0-based over decisions 1..m) is the inclusive integer
    sum-count range deciding ``D = i + 1``, or None when that decision is
    unreachable at this stage.  An upper bound of None means unbounded
    (Poisson top window).  ``ties[i]`` marks the overlap region of zone
    boundary ``i + 1`` where both crossings held and the cut ``c``
    resolved the decision.
    """

    n: int
    f: tuple[float, ...]
    g: tuple[float, ...]
    windows: tuple[tuple[int, int | None] | None, ...]
    ties: tuple[tuple[int, int] | None, ...]

    @property
    def m(self) -> int:
        return len(self.windows)

    def decision_for_sum(self, k: int) -> int:
        """Decision variable for sum count k: 0 = continue, else i in 1..m."""
        for i, win in enumerate(self.windows):
            if win is None:
                continue
            lo, hi = win
            if k >= lo and (hi is None or k <= hi):
                return i + 1
        return 0

    def tie_for_sum(self, k: int) -> bool:
        for tie in self.ties:
            if tie is not None and tie[0] <= k <= tie[1]:
                return True
        return False

    def continue_gaps(self, k_top: int | None):
        """Integer intervals of the continuation region up to k_top."""
        gaps = []
        cursor = 0
        for win in self.windows:
            if win is None:
                continue
            lo, hi = win
            if lo > cursor:
                gaps.append((cursor, lo - 1))
            cursor = (hi + 1) if hi is not None else None
            if cursor is None:
                return gaps
        if cursor is not None and k_top is not None and cursor <= k_top:
            gaps.append((cursor, k_top))
        elif cursor is not None and k_top is None:
            gaps.append((cursor, None))
        return gaps


@dataclass(frozen=True)
class TestOutcome:
    stage_index: int
    sample_count: int
    accepted_index: int
    terminal_estimate: float
    tie_occurred: bool
    forced: bool = False  # decision imposed by a sample cap, not a crossing


@dataclass(frozen=True)
class MultiHypPlan:
    """A fully materialized multistage plan over m hypotheses."""

    model: object
    family: object
    zone_lo: tuple[float, ...]
    zone_hi: tuple[float, ...]
    base_alphas: tuple[float, ...]
    base_betas: tuple[float, ...]
    zeta: float
    stages: tuple[StageRule, ...]
    c_policy: str = C_POLICY_SUPPORT_MIDPOINT
    kind: str = "multi"

    @property
    def m(self) -> int:
        return len(self.zone_lo) + 1

    @property
    def s(self) -> int:
        return len(self.stages)

    @property
    def stage_ns(self) -> tuple[int, ...]:
        return tuple(st.n for st in self.stages)

    @property
    def alphas(self) -> tuple[float, ...]:
        """Effective per-stage lower-limit levels per zone boundary."""
        return tuple(self.zeta * a for a in self.base_alphas)

    @property
    def betas(self) -> tuple[float, ...]:
        return tuple(self.zeta * b for b in self.base_betas)


@dataclass(frozen=True)
class OneSidedPlan(MultiHypPlan):
    """Two-hypothesis plan for H0: theta <= theta0 versus H1: theta >= theta1."""

    theta0: float = 0.0
    theta1: float = 0.0
    tiebreak: str = TIEBREAK_LIKELIHOOD_RATIO
    sample_cap: int | None = None
    kind: str = "one-sided"

    @property
    def alpha(self) -> float:
        return self.base_alphas[0]

    @property
    def beta(self) -> float:
        return self.base_betas[0]


def sample_bound(model, theta0: float, theta1: float, zeta_alpha: float, zeta_beta: float) -> int:
    """Hard sample-size cap for the fully sequential one-sided test.

    Largest integer strictly below
    max(ln(zeta_alpha) / ln C(mid, theta0), ln(zeta_beta) / ln C(mid, theta1))
    where C is the Chernoff function and mid the zone midpoint.
    """
    model.validate_theta(theta0)
    model.validate_theta(theta1)
    if not theta0 < theta1:
        raise DomainError(f"need theta0 < theta1, got {theta0} >= {theta1}")
    for d in (zeta_alpha, zeta_beta):
        if not (0.0 < d < 1.0):
            raise DomainError(f"effective risk level must lie in (0, 1), got {d}")
    mid = 0.5 * (theta0 + theta1)
    lc0 = float(model.log_chernoff(mid, theta0))
    lc1 = float(model.log_chernoff(mid, theta1))
    if lc0 >= 0.0 or lc1 >= 0.0:
        raise DomainError("degenerate zone: rate function is 1 at the midpoint")
    bound = max(math.log(zeta_alpha) / lc0, math.log(zeta_beta) / lc1)
    return max(1, math.ceil(bound) - 1)


def _interval_from_upset(mask: np.ndarray):
    """First index of a monotone up-set mask, or None when empty."""
    if not mask.any():
        return None
    return int(np.argmax(mask))


def _interval_from_downset(mask: np.ndarray):
    """Last index of a monotone down-set mask, or None when empty."""
    if not mask.any():
        return None
    return int(len(mask) - 1 - np.argmax(mask[::-1]))


def _support_masks(model, family, n, zone_lo, zone_hi, alphas, betas):
    """Crossing masks over sum counts 0..K for every zone boundary.

    For Poisson the scan range grows until each reject-low crossing has
    been located and each accept set ends strictly inside the range;
    beyond K every count lies in all reject-low sets and no accept set,
    so decisions out there belong to the top window.
    """
    nb = len(zone_lo)
    k_top = model.sum_upper(n)
    if k_top is not None:
        ks = np.arange(k_top + 1)
        A = [family.support_lower_crossed(model, n, ks, zone_lo[i], alphas[i]) for i in range(nb)]
        B = [family.support_upper_crossed(model, n, ks, zone_hi[i], betas[i]) for i in range(nb)]
        return ks, A, B
    K = 64 + int(8 * n * max(zone_hi))
    while True:
        ks = np.arange(K + 1)
        A = [family.support_lower_crossed(model, n, ks, zone_lo[i], alphas[i]) for i in range(nb)]
        B = [family.support_upper_crossed(model, n, ks, zone_hi[i], betas[i]) for i in range(nb)]
        ok = all(a.any() for a in A) and all(not b[-1] for b in B)
        if ok:
            return ks, A, B
        if K > _POISSON_SCAN_CAP:
            raise InfeasibleDesignError(
                f"no reject-low crossing within {K} counts at stage size {n}"
            )
        K *= 2


def _log_lr_cut(model, n, c_interval, theta0, theta1, log_ratio):
    """Largest accepting count in the tie region under the likelihood-ratio rule.

    The per-path log likelihood ratio log f(X; theta0) - log f(X; theta1)
    depends on the data only through the sum and decreases in it, so the
    rule is a threshold: accept H0 for counts up to the returned value
    (None when the whole region rejects).
    """
    lo, hi = c_interval
    ks = np.arange(lo, hi + 1)
    llr = model.log_pmf_sum(n, ks, theta0) - model.log_pmf_sum(n, ks, theta1)
    acc = llr >= log_ratio
    if not acc.any():
        return None
    return int(ks[_interval_from_downset(acc)])


def build_stage_rule(
    model,
    family,
    n: int,
    zone_lo: Sequence[float],
    zone_hi: Sequence[float],
    alphas: Sequence[float],
    betas: Sequence[float],
    c_policy: str = C_POLICY_SUPPORT_MIDPOINT,
    lr_cut: tuple[float, float, float] | None = None,
) -> StageRule:
    """Materialize the decision windows of a single stage.

    ``lr_cut = (theta0, theta1, log_ratio)`` switches the tie policy of a
    two-hypothesis stage to the likelihood-ratio rule; ``c_policy`` selects
    the midpoint flavour otherwise.
    """
    nb = len(zone_lo)
    m = nb + 1
    ks, A, B = _support_masks(model, family, n, zone_lo, zone_hi, alphas, betas)
    k_top = model.sum_upper(n)

    min_a = [_interval_from_upset(a) for a in A]
    max_b = [_interval_from_downset(b) for b in B]

    # Tie regions: the reject-low and accept sets overlap exactly when
    # min A <= max B (both are monotone intervals of the support).
    ties: list[tuple[int, int] | None] = []
    cut: list[float | None] = []
    for i in range(nb):
        if min_a[i] is not None and max_b[i] is not None and min_a[i] <= max_b[i]:
            lo_c, hi_c = min_a[i], max_b[i]
            ties.append((lo_c, hi_c))
            if lr_cut is not None:
                theta0, theta1, log_ratio = lr_cut
                k_acc = _log_lr_cut(model, n, (lo_c, hi_c), theta0, theta1, log_ratio)
                c = (k_acc + 0.5) / n if k_acc is not None else (lo_c - 0.5) / n
            elif c_policy == C_POLICY_SUPPORT_MIDPOINT:
                c = (lo_c + hi_c) / (2.0 * n)
            elif c_policy == C_POLICY_ZONE_MIDPOINT:
                c = 0.5 * (zone_lo[i] + zone_hi[i])
            elif c_policy == TIEBREAK_ALWAYS_ACCEPT:
                c = (hi_c + 0.5) / n
            elif c_policy == TIEBREAK_ALWAYS_REJECT:
                c = (lo_c - 0.5) / n
            else:
                raise DomainError(f"unknown tie policy {c_policy!r}")
            cut.append(c)
        else:
            ties.append(None)
            cut.append(None)

    # Window edge values.  g is the exclusive lower edge of the window
    # above boundary i; when there is no tie region it sits just below the
    # smallest crossing count so that count itself decides (the crossing
    # event is inclusive).
    f_vals = []
    g_vals = []
    for i in range(nb):
        if ties[i] is not None:
            f_vals.append(cut[i])
            g_vals.append(cut[i])
        else:
            f_vals.append(max_b[i] / n if max_b[i] is not None else -math.inf)
            g_vals.append((min_a[i] - 0.5) / n if min_a[i] is not None else math.inf)
    f = tuple(f_vals + [math.inf])
    g = tuple([-math.inf] + g_vals)

    windows: list[tuple[int, int | None] | None] = []
    for i in range(m):
        # Window i (deciding D = i + 1) runs over (g[i], f[i]] where the
        # tuples are laid out as g = (g_0..g_{m-1}), f = (f_1..f_m).
        if i == 0:
            klo = 0
        elif math.isinf(g[i]):
            klo = None
        else:
            klo = _count_floor(n * g[i]) + 1
        if i == nb:
            khi = k_top  # None for Poisson: unbounded top window
        elif f[i] == -math.inf:
            khi = None
            klo = None  # unreachable decision: no accept set at this stage
        else:
            khi = _count_floor(n * f[i])
        if klo is None or (khi is not None and khi < max(klo, 0)):
            windows.append(None)
        else:
            windows.append((max(klo, 0), khi))

    rule = StageRule(n=n, f=f, g=g, windows=tuple(windows), ties=tuple(ties))
    _validate_windows(rule)
    return rule


def _validate_windows(rule: StageRule) -> None:
    cursor = -1
    for win in rule.windows:
        if win is None:
            continue
        lo, hi = win
        if lo <= cursor:
            raise InfeasibleDesignError(f"stage {rule.n}: decision windows overlap")
        if hi is None:
            break
        cursor = hi


def stage_is_closed(rule: StageRule, model, n: int) -> bool:
    """True when every support point of the stage falls in some window."""
    return not rule.continue_gaps(model.sum_upper(n))


def _all_ties_present(rule: StageRule) -> bool:
    return all(t is not None for t in rule.ties)


def stage_schedule(n1: int, ns: int, s: int, kind: str) -> tuple[int, ...]:
    """Strictly increasing stage sizes from n1 to ns (inclusive)."""
    if ns < n1:
        raise DomainError(f"need n1 <= ns, got {n1} > {ns}")
    if s <= 1 or n1 == ns:
        return (ns,)
    if kind == "arithmetic":
        xs = np.linspace(n1, ns, s)
    elif kind == "geometric":
        xs = np.exp(np.linspace(math.log(n1), math.log(ns), s))
    else:
        raise DomainError(f"unknown schedule {kind!r}")
    return tuple(sorted({int(round(x)) for x in xs}))


def _check_zones(model, zone_lo, zone_hi) -> None:
    if len(zone_lo) != len(zone_hi) or not zone_lo:
        raise DomainError("zone endpoint sequences must be nonempty and of equal length")
    for lo, hi in zip(zone_lo, zone_hi):
        model.validate_theta(lo)
        model.validate_theta(hi)
        if not lo < hi:
            raise DomainError(f"zone must be a nonempty open interval, got [{lo}, {hi}]")
    for i in range(len(zone_lo) - 1):
        if not zone_hi[i] <= zone_lo[i + 1]:
            raise DomainError("indifference zones must be ordered and non-overlapping")


def _check_risks(base_alphas, base_betas, zeta, nb) -> None:
    if len(base_alphas) != nb or len(base_betas) != nb:
        raise DomainError("need one (alpha, beta) base pair per zone boundary")
    for v in (*base_alphas, *base_betas):
        if not v > 0.0 or math.isinf(v):
            raise DomainError(f"base risk coefficients must be positive, got {v}")
    top = max(max(base_alphas), max(base_betas))
    if not (0.0 < zeta < 1.0 / top):
        raise DomainError(f"zeta must lie in (0, {1.0 / top:.6g}), got {zeta}")


def build_thresholds(
    model,
    family,
    zone_lo: Sequence[float],
    zone_hi: Sequence[float],
    base_alphas: Sequence[float],
    base_betas: Sequence[float],
    zeta: float,
    stage_ns: Sequence[int],
    c_policy: str = C_POLICY_SUPPORT_MIDPOINT,
    lr_cut: tuple[float, float, float] | None = None,
) -> tuple[StageRule, ...]:
    alphas = [zeta * a for a in base_alphas]
    betas = [zeta * b for b in base_betas]
    return tuple(
        build_stage_rule(model, family, n, zone_lo, zone_hi, alphas, betas, c_policy, lr_cut)
        for n in stage_ns
    )


def _minimal_last_stage(model, family, zone_lo, zone_hi, alphas, betas, c_policy,
                        lr_cut, require_ties: bool, max_stage_size: int) -> int:
    for n in range(1, max_stage_size + 1):
        rule = build_stage_rule(model, family, n, zone_lo, zone_hi, alphas, betas,
                                c_policy, lr_cut)
        if require_ties and not _all_ties_present(rule):
            continue
        if stage_is_closed(rule, model, n):
            return n
    raise InfeasibleDesignError(
        f"no closed final stage within {max_stage_size} samples; "
        "widen the zones or increase the risk budget"
    )


def _minimal_first_stage(model, family, zone_lo, zone_hi, alphas, betas, c_policy,
                         lr_cut, ns: int) -> int:
    for n in range(1, ns + 1):
        rule = build_stage_rule(model, family, n, zone_lo, zone_hi, alphas, betas,
                                c_policy, lr_cut)
        if any(w is not None for w in rule.windows):
            return n
    return ns


def build_multihyp_plan(
    model,
    family,
    zone_lo: Sequence[float],
    zone_hi: Sequence[float],
    zeta: float,
    base_alphas: Sequence[float] | None = None,
    base_betas: Sequence[float] | None = None,
    stage_ns: Sequence[int] | None = None,
    stages: int = 1,
    schedule: str = "geometric",
    c_policy: str = C_POLICY_SUPPORT_MIDPOINT,
    max_stage_size: int = 200_000,
) -> MultiHypPlan:
    """Build a closed m-hypothesis plan.

    When ``stage_ns`` is omitted, the final size is the smallest one whose
    stage has a tie region at every zone boundary (which closes the stage)
    and the first size the smallest at which any decision is reachable;
    ``stages`` sizes are then spread on the requested ``schedule``.
    """
    if isinstance(family, str):
        family = family_by_tag(family)
    _check_zones(model, zone_lo, zone_hi)
    nb = len(zone_lo)
    base_alphas = tuple(base_alphas) if base_alphas is not None else (1.0,) * nb
    base_betas = tuple(base_betas) if base_betas is not None else (1.0,) * nb
    _check_risks(base_alphas, base_betas, zeta, nb)
    if c_policy not in _C_POLICIES:
        raise DomainError(f"unknown c policy {c_policy!r}")
    alphas = [zeta * a for a in base_alphas]
    betas = [zeta * b for b in base_betas]

    if stage_ns is None:
        ns = _minimal_last_stage(model, family, zone_lo, zone_hi, alphas, betas,
                                 c_policy, None, require_ties=True,
                                 max_stage_size=max_stage_size)
        n1 = _minimal_first_stage(model, family, zone_lo, zone_hi, alphas, betas,
                                  c_policy, None, ns)
        stage_ns = stage_schedule(n1, ns, stages, schedule)
    else:
        stage_ns = tuple(int(n) for n in stage_ns)
        if any(b <= a for a, b in zip(stage_ns, stage_ns[1:])) or stage_ns[0] < 1:
            raise DomainError("stage sizes must be strictly increasing positive integers")

    rules = build_thresholds(model, family, zone_lo, zone_hi, base_alphas, base_betas,
                             zeta, stage_ns, c_policy)
    if not stage_is_closed(rules[-1], model, stage_ns[-1]):
        raise InfeasibleDesignError(
            f"final stage of size {stage_ns[-1]} leaves continuation points; "
            "increase the last stage size"
        )
    return MultiHypPlan(
        model=model, family=family,
        zone_lo=tuple(zone_lo), zone_hi=tuple(zone_hi),
        base_alphas=base_alphas, base_betas=base_betas, zeta=zeta,
        stages=rules, c_policy=c_policy,
    )


def build_one_sided_plan(
    model,
    family,
    theta0: float,
    theta1: float,
    alpha: float,
    beta: float,
    zeta: float,
    stage_ns: Sequence[int] | None = None,
    stages: int = 1,
    schedule: str = "geometric",
    fully_sequential: bool = False,
    tiebreak: str = TIEBREAK_LIKELIHOOD_RATIO,
    max_stage_size: int = 200_000,
) -> OneSidedPlan:
    """Build a closed one-sided plan for H0: theta <= theta0 vs H1: theta >= theta1.

    The tie rule resolves the case where both crossings hold at once; the
    default accepts H0 exactly when the likelihood ratio of the two zone
    endpoints is at least alpha/beta.
    """
    if isinstance(family, str):
        family = family_by_tag(family)
    _check_zones(model, (theta0,), (theta1,))
    if tiebreak not in _TIEBREAKS:
        raise DomainError(f"unknown tiebreak {tiebreak!r}")
    _check_risks((alpha,), (beta,), zeta, 1)
    alphas = [zeta * alpha]
    betas = [zeta * beta]
    if tiebreak == TIEBREAK_LIKELIHOOD_RATIO:
        lr_cut = (theta0, theta1, math.log(alpha / beta))
        c_policy = C_POLICY_SUPPORT_MIDPOINT  # unused under lr_cut
    else:
        lr_cut = None
        c_policy = tiebreak

    cap = None
    if isinstance(family, (ExactLimits, ChernoffLimits)):
        cap = sample_bound(model, theta0, theta1, alphas[0], betas[0])

    if stage_ns is None:
        ns = _minimal_last_stage(model, family, (theta0,), (theta1,), alphas, betas,
                                 c_policy, lr_cut, require_ties=False,
                                 max_stage_size=(cap + 1 if cap else max_stage_size))
        if fully_sequential:
            stage_ns = tuple(range(1, ns + 1))
        else:
            n1 = _minimal_first_stage(model, family, (theta0,), (theta1,), alphas,
                                      betas, c_policy, lr_cut, ns)
            stage_ns = stage_schedule(n1, ns, stages, schedule)
    else:
        stage_ns = tuple(int(n) for n in stage_ns)
        if any(b <= a for a, b in zip(stage_ns, stage_ns[1:])) or stage_ns[0] < 1:
            raise DomainError("stage sizes must be strictly increasing positive integers")

    rules = build_thresholds(model, family, (theta0,), (theta1,), (alpha,), (beta,),
                             zeta, stage_ns, c_policy, lr_cut)
    if not stage_is_closed(rules[-1], model, stage_ns[-1]):
        raise InfeasibleDesignError(
            f"final stage of size {stage_ns[-1]} leaves continuation points"
        )
    return OneSidedPlan(
        model=model, family=family,
        zone_lo=(theta0,), zone_hi=(theta1,),
        base_alphas=(alpha,), base_betas=(beta,), zeta=zeta,
        stages=rules, c_policy=c_policy if lr_cut is None else C_POLICY_SUPPORT_MIDPOINT,
        theta0=theta0, theta1=theta1, tiebreak=tiebreak, sample_cap=cap,
    )


def decision_variable(plan: MultiHypPlan, stage_index: int, theta_hat: float) -> int:
    """Decision variable at 1-based stage ``stage_index`` for mean ``theta_hat``."""
    rule = plan.stages[stage_index - 1]
    k = int(round(theta_hat * rule.n))
    if abs(theta_hat * rule.n - k) > 1e-6:
        raise DomainError(f"{theta_hat} is not a support point of a size-{rule.n} mean")
    return rule.decision_for_sum(k)


def _take(it: Iterator, count: int, model) -> int:
    total = 0
    for _ in range(count):
        try:
            x = next(it)
        except StopIteration:
            raise StreamExhaustedError(f"stream ended; {count} more values were needed")
        if isinstance(model, Bernoulli) and x not in (0, 1):
            raise DomainError(f"Bernoulli stream must yield 0/1 values, got {x!r}")
        if isinstance(model, Poisson) and (x < 0 or x != int(x)):
            raise DomainError(f"Poisson stream must yield nonnegative integers, got {x!r}")
        total += int(x)
    return total


def run_plan(plan: MultiHypPlan, stream: Iterable) -> TestOutcome:
    """Execute the plan on an observation stream, consuming exactly as many
    values as the reached stage requires."""
    it = iter(stream)
    total = 0
    prev_n = 0
    for idx, rule in enumerate(plan.stages, start=1):
        total += _take(it, rule.n - prev_n, plan.model)
        prev_n = rule.n
        d = rule.decision_for_sum(total)
        if d != 0:
            return TestOutcome(
                stage_index=idx,
                sample_count=rule.n,
                accepted_index=d - 1,
                terminal_estimate=total / rule.n,
                tie_occurred=rule.tie_for_sum(total),
            )
    raise InfeasibleDesignError("plan is not closed: no decision at the final stage")
