"""Behavioral analysis pipeline for crossing logs.

Filters raw step records down to interesting pedestrian decisions, builds
per-distance Beta-posterior yield curves (flat prior), scans crash-cost
candidates by Bernoulli log-likelihood against the model's yield curve,
and emits plottable curve data plus a structured fit summary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Sequence, Union

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from seqchicken.controller import ScenarioGeometry
from seqchicken.game import (
    Action,
    BoardBoundsError,
    DegenerateGameError,
    GameParams,
    cumulative_no_yield,
    yield_curve_model,
)
from seqchicken.records import CrossingRecord, Outcome

__all__ = [
    "DecisionPoint",
    "BetaBin",
    "YieldCurve",
    "FilterFunnel",
    "FitResult",
    "FitFailureError",
    "DEFAULT_UCRASH_GRID",
    "PROB_FLOOR",
    "filter_records",
    "filter_funnel",
    "empirical_yield_curve",
    "log_likelihood",
    "fit_ucrash",
    "write_curve_csv",
    "write_cumulative_csv",
    "format_fit_summary",
    "CrashCostEstimator",
]

#: Candidate crash costs scanned by default (seconds).
DEFAULT_UCRASH_GRID = (2.0, 3.0, 10.0, 100.0, 1e3, 1e4, 1e6)

#: Probabilities are clamped to [PROB_FLOOR, 1 - PROB_FLOOR] before log().
PROB_FLOOR = 1e-9

#: Decisions below this bin sit inside or next to the crash window, where
#: the model makes no prediction; they are reported but never enter the
#: likelihood.
MIN_MODEL_BIN = 2


class FitFailureError(RuntimeError):
    """Every candidate crash cost failed to evaluate."""


class DecisionPoint(NamedTuple):
    """One interesting pedestrian decision: distance bin and chosen action."""

    k: int
    action: Action


@dataclass(frozen=True)
class BetaBin:
    """Beta(alpha, beta) posterior over a bin's yield probability."""

    alpha: float
    beta: float

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    @property
    def sd(self) -> float:
        a, b = self.alpha, self.beta
        return math.sqrt(a * b / ((a + b) ** 2 * (a + b + 1)))

    @property
    def n(self) -> int:
        return int(self.alpha + self.beta - 2)


@dataclass(frozen=True)
class YieldCurve:
    """Per-bin Beta posteriors, flat Beta(1, 1) prior."""

    bins: dict[int, BetaBin]

    def mean_curve(self, descending: bool = False) -> list[tuple[int, float]]:
        ks = sorted(self.bins, reverse=descending)
        return [(k, self.bins[k].mean) for k in ks]


@dataclass
class FilterFunnel:
    """Counts at each analysis filter stage, plus decision summaries."""

    total: int = 0
    skipped_malformed: int = 0
    skipped_auto: int = 0
    after_first_2m: int = 0
    after_final_box_dedup: int = 0
    decisions: int = 0
    below_model_bin: int = 0
    crossings: int = 0
    slow_decisions: int = 0
    pedestrian_won_decisions: int = 0
    decided_decisions: int = 0
    per_session_win_share: dict[str, float] = field(default_factory=dict)
    points: list[DecisionPoint] = field(default_factory=list)

    @property
    def slow_share(self) -> Optional[float]:
        return self.slow_decisions / self.decisions if self.decisions else None

    @property
    def pedestrian_win_share(self) -> Optional[float]:
        if not self.decided_decisions:
            return None
        return self.pedestrian_won_decisions / self.decided_decisions

    def win_share_spread(self) -> tuple[Optional[float], Optional[float]]:
        """(sd, se) of the per-session pedestrian win shares."""
        shares = list(self.per_session_win_share.values())
        if len(shares) < 2:
            return None, None
        sd = float(np.std(shares, ddof=1))
        return sd, sd / math.sqrt(len(shares))


def _crossing_groups(records: Iterable[CrossingRecord]):
    groups: dict[tuple[str, int], list[CrossingRecord]] = {}
    for record in records:
        groups.setdefault((record.session_id, record.crossing_id), []).append(record)
    for rows in groups.values():
        rows.sort(key=lambda r: r.t)
    return groups


def filter_funnel(records: Iterable[CrossingRecord], geom: ScenarioGeometry) -> FilterFunnel:
    """Apply the analysis filters, keeping stage-by-stage counts.

    Stages, per crossing: drop steps before the pedestrian has traveled
    2 m from its start (acceleration phase); keep only the first step in
    the final (smallest non-negative) pedestrian box; keep only
    interesting steps with a recorded pedestrian action.  Malformed and
    timeout-auto-played records are skipped up front.
    """
    funnel = FilterFunnel()
    groups = _crossing_groups(records)
    funnel.crossings = len(groups)
    session_dec: dict[str, list[bool]] = {}
    for rows in groups.values():
        funnel.total += len(rows)
        clean: list[CrossingRecord] = []
        for r in rows:
            if r.auto:
                funnel.skipped_auto += 1
            elif r.ped_pos_m is None or r.ped_box is None:
                funnel.skipped_malformed += 1
            else:
                clean.append(r)
        if not clean:
            continue
        outcome = next((r.winner for r in reversed(rows) if r.winner is not None), None)

        start = clean[0].ped_pos_m
        traveled = [r for r in clean if (start - r.ped_pos_m) >= 2.0]
        funnel.after_first_2m += len(traveled)

        approach_boxes = [r.ped_box for r in traveled if r.ped_box >= 0]
        if approach_boxes:
            final_box = min(approach_boxes)
            seen_final = False
            deduped = []
            for r in traveled:
                if r.ped_box == final_box:
                    if seen_final:
                        continue
                    seen_final = True
                deduped.append(r)
        else:
            deduped = traveled
        funnel.after_final_box_dedup += len(deduped)

        for r in deduped:
            if not (r.interesting and r.ped_action is not None):
                continue
            if r.ped_box < 0:
                funnel.skipped_malformed += 1
                continue
            funnel.decisions += 1
            funnel.points.append(DecisionPoint(r.ped_box, r.ped_action))
            if r.ped_box < MIN_MODEL_BIN:
                funnel.below_model_bin += 1
            if r.ped_action is Action.SLOW:
                funnel.slow_decisions += 1
            if outcome in (Outcome.PEDESTRIAN_FIRST, Outcome.VEHICLE_FIRST):
                funnel.decided_decisions += 1
                won = outcome is Outcome.PEDESTRIAN_FIRST
                funnel.pedestrian_won_decisions += won
                session_dec.setdefault(r.session_id, []).append(won)
    funnel.per_session_win_share = {
        s: sum(v) / len(v) for s, v in session_dec.items() if v
    }
    return funnel


def filter_records(
    records: Iterable[CrossingRecord], geom: ScenarioGeometry
) -> list[DecisionPoint]:
    """Interesting pedestrian decisions surviving the analysis filters."""
    return filter_funnel(records, geom).points


def empirical_yield_curve(
    points: Sequence[DecisionPoint], bins: Optional[Iterable[int]] = None
) -> YieldCurve:
    """Beta posterior per bin: alpha = 1 + #SLOW, beta = 1 + #FAST."""
    counts: dict[int, list[int]] = {}
    for p in points:
        slot = counts.setdefault(p.k, [0, 0])
        slot[0 if p.action is Action.SLOW else 1] += 1
    if bins is None:
        bins = range(min(counts), max(counts) + 1) if counts else ()
    out = {}
    for k in bins:
        slow, fast = counts.get(k, (0, 0))
        out[int(k)] = BetaBin(1.0 + slow, 1.0 + fast)
    return YieldCurve(out)


def _params_for(params: Optional[GameParams], c: float, k_max: int) -> GameParams:
    base = params if params is not None else GameParams()
    bound = max(base.max_x, base.max_y, k_max + 2)
    return replace(base, crash_cost=float(c), max_y=bound, max_x=bound)


def log_likelihood(
    points: Sequence[DecisionPoint], c: float, params: Optional[GameParams] = None
) -> float:
    """Bernoulli log-likelihood of the decisions under crash cost ``c``.

    Every point must sit at bin k >= 2; the model's yield probability at
    the symmetric state (k, k) is clamped away from 0 and 1 before log().
    """
    if not points:
        return 0.0
    if any(p.k < MIN_MODEL_BIN for p in points):
        raise ValueError(f"all decision bins must be >= {MIN_MODEL_BIN} for the likelihood")
    k_max = max(p.k for p in points)
    curve = dict(yield_curve_model(_params_for(params, c, k_max), k_max))
    total = 0.0
    for p in points:
        prob = min(max(curve[p.k], PROB_FLOOR), 1.0 - PROB_FLOOR)
        total += math.log(prob if p.action is Action.SLOW else 1.0 - prob)
    return total


@dataclass(frozen=True)
class FitResult:
    """Grid-scan result: per-candidate log-likelihoods and curve data.

    ``candidates`` holds (crash_cost, log_likelihood) with None marking a
    candidate whose solve failed.  ``best_c`` maximizes the likelihood;
    exact ties break toward the smaller crash cost.  ``cumulative_rmse``
    compares each model's survival curve against the empirical one and is
    a diagnostic only, never used for selection.
    """

    candidates: tuple[tuple[float, Optional[float]], ...]
    best_c: float
    k_max: int
    n_points: int
    n_likelihood_points: int
    model_curves: dict[float, list[tuple[int, float]]]
    model_cumulatives: dict[float, list[tuple[int, float]]]
    empirical: YieldCurve
    empirical_cumulative: list[tuple[int, float]]
    cumulative_rmse: dict[float, float]

    @property
    def log_likelihoods(self) -> dict[float, float]:
        return {c: ll for c, ll in self.candidates if ll is not None}


def fit_ucrash(
    points: Sequence[DecisionPoint],
    grid: Sequence[float] = DEFAULT_UCRASH_GRID,
    params: Optional[GameParams] = None,
) -> FitResult:
    """Scan crash-cost candidates by log-likelihood and attach curve data.

    Bins below 2 are kept in the empirical curve but excluded from the
    likelihood.  A candidate whose solver fails is marked invalid rather
    than aborting the scan; if every candidate fails, FitFailureError.
    """
    grid = tuple(float(c) for c in grid)
    if not grid:
        raise ValueError("candidate grid must be non-empty")
    points = list(points)
    ll_points = [p for p in points if p.k >= MIN_MODEL_BIN]
    k_max = max((p.k for p in ll_points), default=15)

    candidates: list[tuple[float, Optional[float]]] = []
    for c in grid:
        try:
            candidates.append((c, log_likelihood(ll_points, c, params)))
        except (DegenerateGameError, BoardBoundsError):
            candidates.append((c, None))
    valid = [(c, ll) for c, ll in candidates if ll is not None]
    if not valid:
        raise FitFailureError(f"all {len(grid)} candidates failed to evaluate")
    best_c = min(valid, key=lambda t: (-t[1], t[0]))[0]

    bins_desc = list(range(k_max, MIN_MODEL_BIN - 1, -1))
    all_bins = sorted({p.k for p in points} | set(range(MIN_MODEL_BIN, k_max + 1)))
    empirical = empirical_yield_curve(points, bins=all_bins)
    emp_desc = [(k, empirical.bins[k].mean) for k in bins_desc]
    empirical_cumulative = cumulative_no_yield(emp_desc)

    model_curves = {}
    model_cumulatives = {}
    rmse = {}
    emp_s = {k: s for k, s in empirical_cumulative}
    for c, ll in valid:
        curve = yield_curve_model(_params_for(params, c, k_max), k_max)
        model_curves[c] = curve
        cum = cumulative_no_yield(sorted(curve, reverse=True))
        model_cumulatives[c] = cum
        rmse[c] = math.sqrt(
            sum((s - emp_s[k]) ** 2 for k, s in cum) / len(cum)
        )
    return FitResult(
        candidates=tuple(candidates),
        best_c=best_c,
        k_max=k_max,
        n_points=len(points),
        n_likelihood_points=len(ll_points),
        model_curves=model_curves,
        model_cumulatives=model_cumulatives,
        empirical=empirical,
        empirical_cumulative=empirical_cumulative,
        cumulative_rmse=rmse,
    )


# ---------------------------------------------------------------------------
# Output writers (plain delimited text; plotting happens elsewhere).


def _c_label(c: float) -> str:
    return str(int(c)) if float(c).is_integer() else repr(c)


def _fmt(x: Optional[float]) -> str:
    return "" if x is None else f"{x:.10g}"


def write_curve_csv(path: Union[str, Path], result: FitResult, geom: ScenarioGeometry) -> None:
    """Yield-curve data: empirical band plus one model column per candidate."""
    cs = sorted(result.model_curves)
    header = ["k", "distance_m", "empirical_mean", "empirical_sd"]
    header += [f"yield_C{_c_label(c)}" for c in cs]
    lines = [",".join(header)]
    models = {c: dict(result.model_curves[c]) for c in cs}
    for k in sorted(result.empirical.bins):
        bin_ = result.empirical.bins[k]
        row = [str(k), _fmt((k + 0.5) * geom.ped_box), _fmt(bin_.mean), _fmt(bin_.sd)]
        row += [_fmt(models[c].get(k)) for c in cs]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_cumulative_csv(
    path: Union[str, Path], result: FitResult, geom: ScenarioGeometry
) -> None:
    """Survival-curve data (probability of reaching each bin with no yield)."""
    cs = sorted(result.model_cumulatives)
    header = ["k", "distance_m", "empirical_S"]
    header += [f"S_C{_c_label(c)}" for c in cs]
    lines = [",".join(header)]
    emp = dict(result.empirical_cumulative)
    models = {c: dict(result.model_cumulatives[c]) for c in cs}
    for k in sorted(emp, reverse=True):
        row = [str(k), _fmt((k + 0.5) * geom.ped_box), _fmt(emp[k])]
        row += [_fmt(models[c].get(k)) for c in cs]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def format_fit_summary(result: FitResult, funnel: Optional[FilterFunnel] = None) -> str:
    """Structured text summary: best candidate, LL table, filter funnel."""
    lines = ["fit_summary", "==========="]
    lines.append(f"best_ucrash_s: {_c_label(result.best_c)}")
    lines.append(f"points_total: {result.n_points}")
    lines.append(f"points_in_likelihood: {result.n_likelihood_points}")
    lines.append(f"k_max: {result.k_max}")
    lines.append("")
    lines.append("candidates (ucrash_s, log_likelihood, cumulative_rmse):")
    for c, ll in result.candidates:
        rmse = result.cumulative_rmse.get(c)
        lines.append(
            f"  {_c_label(c):>9}  {('invalid' if ll is None else f'{ll:.6f}'):>14}"
            f"  {_fmt(rmse) if rmse is not None else '':>12}"
        )
    if funnel is not None:
        lines.append("")
        lines.append("filter_funnel:")
        lines.append(f"  records_total: {funnel.total}")
        lines.append(f"  skipped_malformed: {funnel.skipped_malformed}")
        lines.append(f"  skipped_auto_played: {funnel.skipped_auto}")
        lines.append(f"  after_first_2m_removed: {funnel.after_first_2m}")
        lines.append(f"  after_final_box_dedup: {funnel.after_final_box_dedup}")
        lines.append(f"  interesting_decisions: {funnel.decisions}")
        lines.append(f"  below_model_bin: {funnel.below_model_bin}")
        lines.append(f"  crossings: {funnel.crossings}")
        if funnel.decisions:
            lines.append(f"  slow_share: {_fmt(funnel.slow_share)}")
        if funnel.pedestrian_win_share is not None:
            lines.append(f"  pedestrian_win_share: {_fmt(funnel.pedestrian_win_share)}")
            sd, se = funnel.win_share_spread()
            if sd is not None:
                lines.append(f"  pedestrian_win_share_sd_per_session: {_fmt(sd)}")
                lines.append(f"  pedestrian_win_share_se_per_session: {_fmt(se)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Estimator wrapper so the fit composes with scikit-learn tooling.


def _as_decision_points(X) -> list[DecisionPoint]:
    points = []
    for row in X:
        if isinstance(row, DecisionPoint):
            points.append(row)
            continue
        k, action = row
        if not isinstance(action, Action):
            action = Action(str(action).upper())
        points.append(DecisionPoint(int(k), action))
    return points


class CrashCostEstimator(BaseEstimator):
    """Grid-search estimator for the crash cost, scikit-learn style.

    ``fit`` accepts decision points as (bin, action) pairs, with the action
    an :class:`Action` or the strings "SLOW"/"FAST".  After fitting,
    ``best_crash_cost_`` holds the selected candidate and ``result_`` the
    full :class:`FitResult`; ``predict_proba`` returns the fitted model's
    [P(FAST), P(SLOW)] per queried bin.
    """

    def __init__(self, grid: Sequence[float] = DEFAULT_UCRASH_GRID, turn_cost: float = 1.0):
        self.grid = grid
        self.turn_cost = turn_cost

    def fit(self, X, y=None):
        points = _as_decision_points(X)
        params = GameParams(crash_cost=1.0, turn_cost=self.turn_cost)
        self.result_ = fit_ucrash(points, grid=self.grid, params=params)
        self.best_crash_cost_ = self.result_.best_c
        self.log_likelihoods_ = self.result_.log_likelihoods
        return self

    def _check_fitted(self):
        if not hasattr(self, "result_"):
            raise NotFittedError("CrashCostEstimator is not fitted yet; call fit first")

    def predict_proba(self, K):
        self._check_fitted()
        ks = [int(k) for k in np.asarray(K).ravel()]
        k_max = max(max(ks), self.result_.k_max)
        params = GameParams(crash_cost=1.0, turn_cost=self.turn_cost)
        curve = dict(yield_curve_model(_params_for(params, self.best_crash_cost_, k_max), k_max))
        p_slow = np.array([curve[k] for k in ks])
        return np.column_stack([1.0 - p_slow, p_slow])

    @property
    def classes_(self):
        return np.array([Action.FAST.value, Action.SLOW.value])

    def score(self, X, y=None):
        """Mean per-decision log-likelihood under the fitted crash cost."""
        self._check_fitted()
        points = _as_decision_points(X)
        params = GameParams(crash_cost=1.0, turn_cost=self.turn_cost)
        return log_likelihood(points, self.best_crash_cost_, params) / max(len(points), 1)
