"""Optimal-transport verification of designed refractors.

With the cost c(x, m) = log(1 / (1 - x.p2(m))) (Case I) the supporting
structure of a refractor reads log rho(x) = min_i (log b_i + c(x, m_i)).
Taking u = log rho and v = -log b gives u_j + v_i <= c_ji with equality
exactly on the refractor assignment: the refractor plan satisfies
complementary slackness for the transport problem MINIMIZING sum(plan * c)
between its source quadrature and its own measure.  In Case II the cost is
c(x, m) = log(x.p2(m) - 1) and the same structure flips the objective to a
maximization (log h = log b - c there).

The exact plan comes from an LP vertex solve (HiGHS); entropic solvers are
deliberately not used, their blur would contaminate the tie-band comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import Infeasible, ValidationError
from .norms import MediumPair, Regime, norm_gradient
from .solver import (Refractor, RefractorMeasureReport, SourceDensity,
                     TargetMeasure, refractor_map, refractor_measure,
                     rho_values)

__all__ = ["CostMatrix", "build_cost", "solve_ot_exact", "plan_objective",
           "check_c_concavity", "c_concavity_defect", "assignment_agreement"]

MAX_NODES = 2000
MAX_TARGETS = 50


@dataclass(frozen=True)
class CostMatrix:
    """Dense node-by-target costs; -inf marks excluded (infeasible) arcs."""

    entries: np.ndarray
    case2: bool

    @property
    def feasible(self) -> np.ndarray:
        return np.isfinite(self.entries)


def build_cost(pair: MediumPair, src: SourceDensity,
               tgt: TargetMeasure) -> CostMatrix:
    """c_ji = cost(x_j, m_i).  Case I entries are finite and bounded above by
    log(1/(1-kappa)); Case II arcs with x.p2(m) <= 1 are masked with -inf."""
    p2m = norm_gradient(pair.n2, tgt.directions)
    dots = src.nodes @ p2m.T
    if pair.regime is Regime.CASE_I:
        return CostMatrix(entries=-np.log1p(-dots), case2=False)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(dots > 1.0, np.log(np.maximum(dots - 1.0, 1e-300)), -np.inf)
    return CostMatrix(entries=c, case2=True)


def solve_ot_exact(cost: CostMatrix, src: SourceDensity, tgt: TargetMeasure,
                   masses=None) -> np.ndarray:
    """Exact optimal plan (J, N) between the node weights and the target
    masses (tgt.masses unless overridden).

    Case I minimizes sum(plan * c); Case II maximizes it, matching the
    supporting-envelope orientation of each regime.  Raises Infeasible when
    the masked arcs disconnect the instance.
    """
    J, N = cost.entries.shape
    if J > MAX_NODES or N > MAX_TARGETS:
        raise ValidationError(
            f"instance {J}x{N} exceeds the exact-solve budget "
            f"{MAX_NODES}x{MAX_TARGETS}")
    g = np.asarray(tgt.masses if masses is None else masses, dtype=float)
    if g.shape != (N,):
        raise ValidationError("one mass per target required")
    w = src.weights
    feas = cost.feasible
    var_idx = np.flatnonzero(feas.ravel())
    nv = var_idx.size
    cvec = cost.entries.ravel()[var_idx]
    if cost.case2:
        cvec = -cvec  # maximize
    rows_j = var_idx // N
    rows_i = var_idx % N

    from scipy.sparse import coo_matrix

    # node marginals plus all but the last target marginal (redundant row)
    eq_rows = np.concatenate([rows_j, J + rows_i[rows_i < N - 1]])
    eq_cols = np.concatenate([np.arange(nv), np.flatnonzero(rows_i < N - 1)])
    A = coo_matrix((np.ones(eq_rows.size), (eq_rows, eq_cols)),
                   shape=(J + N - 1, nv))
    beq = np.concatenate([w, g[:-1]])
    res = linprog(cvec, A_eq=A.tocsr(), b_eq=beq, bounds=(0, None),
                  method="highs")
    if res.status != 0:
        raise Infeasible(f"exact transport solve failed: {res.message}")
    plan = np.zeros(J * N)
    plan[var_idx] = res.x
    return plan.reshape(J, N)


def plan_objective(cost: CostMatrix, plan: np.ndarray) -> float:
    """sum(plan * c) over the supported arcs (masked arcs carry no mass)."""
    mask = plan > 0.0
    if np.any(mask & ~cost.feasible):
        raise Infeasible("plan puts mass on an excluded arc")
    return float(np.sum(plan[mask] * cost.entries[mask]))


def refractor_plan(r: Refractor, src: SourceDensity,
                   report: RefractorMeasureReport | None = None) -> np.ndarray:
    """The plan induced by the refractor map (ties split equally)."""
    if report is None:
        report = refractor_measure(r, src)
    J = src.count
    N = r.target.count
    plan = np.zeros((J, N))
    single = report.tie_counts == 1
    plan[np.arange(J)[single], report.assignment[single]] = src.weights[single]
    for j in np.flatnonzero(~single):
        ties = refractor_map(r, src.nodes[j])
        ties = (ties,) if isinstance(ties, int) else ties
        plan[j, list(ties)] = src.weights[j] / len(ties)
    return plan


def c_concavity_defect(cost: CostMatrix, log_rho: np.ndarray) -> float:
    """Double c-transform defect of a radial log-profile over the nodes.

    phi is representable as min_i (psi_i + sigma c_ji), sigma the regime sign,
    iff its double transform reproduces it; the defect is the max absolute
    gap, zero (to roundoff) exactly for min-envelope refractors.
    """
    sigma = -1.0 if cost.case2 else 1.0
    sc = sigma * cost.entries
    psi = np.max(log_rho[:, None] - sc, axis=0)
    back = np.min(sc + psi[None, :], axis=1)
    return float(np.max(np.abs(back - log_rho)))


def check_c_concavity(r: Refractor, src: SourceDensity,
                      tol: float = 1e-9) -> bool:
    """Support characterization of the refractor's own radial profile:
    log rho must equal min_i(log b_i + c(., m_i)) at every node."""
    cost = build_cost(r.pair, src, r.target)
    log_rho = np.log(rho_values(r, src.nodes))
    sigma = -1.0 if cost.case2 else 1.0
    direct = np.min(np.log(r.radii)[None, :] + sigma * cost.entries, axis=1)
    if float(np.max(np.abs(direct - log_rho))) > tol:
        return False
    return c_concavity_defect(cost, log_rho) <= tol


def assignment_agreement(r: Refractor, src: SourceDensity,
                         plan: np.ndarray, cost: CostMatrix,
                         band_rtol: float = 1e-9) -> dict:
    """Compare the LP plan's dominant target with the refractor map.

    Nodes whose two best surfaces differ by <= band_rtol relative belong to
    the tie band and are exempt.  Returns masses of the band and of genuine
    mismatches, plus the relative objective gap of the induced plan.
    """
    report = refractor_measure(r, src)
    dominant = np.argmax(plan, axis=1)
    dots = r.dots(src.nodes)
    denom = (dots - 1.0) if r.case2 else (1.0 - dots)
    H = np.where(denom > 0.0, r.radii / np.where(denom > 0.0, denom, 1.0),
                 np.inf)
    Hs = np.sort(H, axis=1)
    band = (Hs[:, 1] - Hs[:, 0]) <= band_rtol * Hs[:, 0] if H.shape[1] > 1 \
        else np.zeros(src.count, dtype=bool)
    mismatch = (dominant != report.assignment) & ~band
    obj_lp = plan_objective(cost, plan)
    obj_rf = plan_objective(cost, refractor_plan(r, src, report))
    return {
        "mismatch_mass": float(np.sum(src.weights[mismatch])),
        "tie_band_mass": float(np.sum(src.weights[band])),
        "total_mass": src.total,
        "objective_lp": obj_lp,
        "objective_refractor": obj_rf,
        "objective_gap_rel": abs(obj_rf - obj_lp) / max(abs(obj_lp), 1e-300),
    }
