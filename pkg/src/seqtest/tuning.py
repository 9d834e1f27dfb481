"""Risk tuning by bracketed bisection on the level scale.

The level scale multiplies every nominal risk coefficient; shrinking it
tightens the per-stage confidence limits and drives the exact error
probabilities toward zero.  The tuner treats feasibility as monotone in
the scale only for bracketing purposes: every candidate is re-verified
with the exact evaluator before it can become the returned value, so a
non-monotone pocket can cost iterations but never soundness.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DomainError, InfeasibleDesignError
from .ocexact import verify_risk
from .plans import build_multihyp_plan, build_one_sided_plan

__all__ = ["TuneResult", "tune_zeta", "tune_one_sided", "tune_multihyp"]

ZETA_FLOOR = 1e-8


@dataclass
class TuneResult:
    zeta: float                   # largest verified-feasible scale found
    plan: object
    report: object                # feasibility report at .zeta
    iterations: int               # feasibility evaluations spent
    bracket: tuple[float, float]  # (feasible, infeasible-or-cap)

    @property
    def bracket_width(self) -> float:
        return self.bracket[1] - self.bracket[0]


def tune_zeta(plan_family, requirement, tol: float = 1e-3,
              zeta_max: float = 1.0, floor: float = ZETA_FLOOR,
              verify=None) -> TuneResult:
    """Largest scale in (0, zeta_max) whose plan passes exact verification.

    ``plan_family`` maps a scale to a plan; a construction error counts as
    infeasible at that scale.  ``verify`` maps a plan to (ok, report) and
    defaults to the exact zone-endpoint verdict against ``requirement``.
    The bracket starts by geometric probing downward from ``zeta_max`` and
    is then bisected to relative width ``tol``; the feasible endpoint is
    returned.  No feasible scale above ``floor`` raises an error.
    """
    if not (0.0 < tol < 1.0):
        raise DomainError(f"tol must lie in (0, 1), got {tol}")
    if not (floor < zeta_max):
        raise DomainError("zeta_max must exceed the search floor")
    if verify is None:
        def verify(plan):
            rep = verify_risk(plan, requirement)
            return rep.satisfied, rep

    evals = 0

    def feasible(z):
        nonlocal evals
        evals += 1
        try:
            plan = plan_family(z)
        except (InfeasibleDesignError, DomainError):
            return False, None, None
        ok, rep = verify(plan)
        return ok, plan, rep

    # The cap itself is usually out of the open domain; probe just inside.
    hi = zeta_max
    z = zeta_max * (1.0 - tol)
    ok, plan, rep = feasible(z)
    if ok:
        return TuneResult(zeta=z, plan=plan, report=rep,
                          iterations=evals, bracket=(z, hi))
    hi = z

    # Geometric probing for a feasible low endpoint.
    lo = None
    z = 0.5 * hi
    while z >= floor:
        ok, plan, rep = feasible(z)
        if ok:
            lo = z
            break
        hi = z
        z *= 0.5
    if lo is None:
        raise InfeasibleDesignError(
            f"no feasible scale above {floor:g}; the stage layout cannot "
            "meet the requirement"
        )
    best_plan, best_rep = plan, rep

    while hi - lo > tol * lo:
        mid = 0.5 * (lo + hi)
        ok, plan, rep = feasible(mid)
        if ok:
            lo, best_plan, best_rep = mid, plan, rep
        else:
            hi = mid
    return TuneResult(zeta=lo, plan=best_plan, report=best_rep,
                      iterations=evals, bracket=(lo, hi))


def tune_one_sided(model, family, theta0: float, theta1: float,
                   alpha: float, beta: float, tol: float = 1e-3,
                   **build_kwargs) -> TuneResult:
    """Tune a one-sided plan so both exact error probabilities fit.

    Remaining keyword arguments go to the plan builder (stage layout, tie
    policy and so on).  The requirement is alpha at the lower zone
    endpoint and beta at the upper one.
    """
    zeta_max = 1.0 / max(alpha, beta)
    return tune_zeta(
        lambda z: build_one_sided_plan(model, family, theta0, theta1,
                                       alpha, beta, zeta=z, **build_kwargs),
        requirement=(alpha, beta), tol=tol, zeta_max=zeta_max,
    )


def tune_multihyp(model, family, zone_lo, zone_hi, deltas,
                  base_alphas=None, base_betas=None, tol: float = 1e-3,
                  **build_kwargs) -> TuneResult:
    """Tune an m-hypothesis plan to per-zone rejection budgets ``deltas``."""
    nb = len(zone_lo)
    ba = tuple(base_alphas) if base_alphas is not None else (1.0,) * nb
    bb = tuple(base_betas) if base_betas is not None else (1.0,) * nb
    zeta_max = 1.0 / max(max(ba), max(bb))
    return tune_zeta(
        lambda z: build_multihyp_plan(model, family, zone_lo, zone_hi, zeta=z,
                                      base_alphas=ba, base_betas=bb,
                                      **build_kwargs),
        requirement=deltas, tol=tol, zeta_max=zeta_max,
    )
