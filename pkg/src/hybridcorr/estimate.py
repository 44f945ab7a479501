"""Instantaneous-correlation estimation from differenced observables.

The estimating equations: sample correlations of first differences of
observables converge (in the number of grid points, and for variance-bearing
pairs also as the sampling window shrinks) to loading-weighted combinations
of the instantaneous Brownian correlations. The loadings are

    c(lam, gam, tau) = gam * (1 - exp(-lam * tau)) / (lam * tau)
    d = sqrt(c1^2 + c2^2 + 2 c1 c2 rho_inner)

Per pair kind:

  G2/G2          4x4 system in (xx, xy, yx, yy), two tenors per side
  G2/Heston      two independent 2x2 systems (log-price and variance columns)
  Heston/Heston  empirical correlations pass through unchanged
  G1/G1, G1/Heston, G1/SingleStateEquity   pass-through
  G1/G2          2x2 system on the G2 side
  G2/SingleStateEquity                     one 2x2 system (log-price only)

Estimates are never clamped here; entries outside [-1, 1] are flagged so
diagnostics stay honest, and the repair stage owns clamping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .blockmatrix import BlockCorrelationMatrix, assemble_block_matrix
from .linsolve import solve_dense
from .models import (
    KIND_BATES,
    KIND_G1,
    KIND_G2,
    KIND_HESTON,
    KIND_SINGLE,
    ComponentSpec,
    G2Params,
    HybridSystemSpec,
)
from .panel import ObservationPanel, parse_key, rate_key, series_key

COND_WARN_THRESHOLD = 1e6
SPACING_WARN_RATIO = 10.0

PAIR_G2G2 = "G2G2"
PAIR_G2HESTON = "G2Heston"
PAIR_HESTONHESTON = "HestonHeston"
PAIR_G1G1 = "G1G1"
PAIR_G1G2 = "G1G2"
PAIR_G1HESTON = "G1Heston"
PAIR_G2SINGLE = "G2Single"
PAIR_G1SINGLE = "G1Single"

PAIR_KINDS = frozenset({
    PAIR_G2G2, PAIR_G2HESTON, PAIR_HESTONHESTON, PAIR_G1G1,
    PAIR_G1G2, PAIR_G1HESTON, PAIR_G2SINGLE, PAIR_G1SINGLE,
})

# solving kinds may leave [-1, 1]; pass-through kinds cannot
SYSTEM_KINDS = frozenset({PAIR_G2G2, PAIR_G2HESTON, PAIR_G1G2, PAIR_G2SINGLE})

_EFFECTIVE = {
    KIND_G1: "G1",
    KIND_G2: "G2",
    KIND_HESTON: "H",
    KIND_BATES: "H",
    KIND_SINGLE: "S",
}

_PAIR_TABLE = {
    ("G2", "G2"): PAIR_G2G2,
    ("G2", "H"): PAIR_G2HESTON,
    ("H", "H"): PAIR_HESTONHESTON,
    ("G1", "G1"): PAIR_G1G1,
    ("G1", "G2"): PAIR_G1G2,
    ("G1", "H"): PAIR_G1HESTON,
    ("G2", "S"): PAIR_G2SINGLE,
    ("G1", "S"): PAIR_G1SINGLE,
}


class MissingObservableError(ValueError):
    """A series the pair kind requires is absent from the panel."""


class ZeroVarianceError(ValueError):
    """A differenced series is constant; its correlation is undefined."""


class DegenerateLoadingError(ValueError):
    """Both factor loadings vanish, leaving nothing to normalize."""


def pair_kind_for(kind_i: str, kind_j: str) -> tuple[str, bool]:
    """Pair kind for two component kinds, plus whether the pair is swapped.

    Bates estimates like Heston. Raises ValueError for combinations the
    method does not define (Heston/SingleStateEquity and
    SingleStateEquity/SingleStateEquity).
    """
    ei, ej = _EFFECTIVE[kind_i], _EFFECTIVE[kind_j]
    if (ei, ej) in _PAIR_TABLE:
        return _PAIR_TABLE[(ei, ej)], False
    if (ej, ei) in _PAIR_TABLE:
        return _PAIR_TABLE[(ej, ei)], True
    raise ValueError(f"unsupported component pair {kind_i}/{kind_j}")


def loading_c(lam: float, gamma: float, tau: float) -> float:
    """gamma * (1 - exp(-lam * tau)) / (lam * tau).

    For lam * tau below 1e-8 the series gamma * (1 - x/2 + x^2/6) is used,
    which also covers lam = 0 exactly.
    """
    x = lam * tau
    if x < 1e-8:
        return gamma * (1.0 - x / 2.0 + x * x / 6.0)
    return gamma * (-np.expm1(-x)) / x


def normalizer_d(
    lam1: float, lam2: float, gamma1: float, gamma2: float, tau: float, rho: float
) -> float:
    """sqrt(c1^2 + c2^2 + 2 c1 c2 rho) with c from ``loading_c``."""
    c1 = loading_c(lam1, gamma1, tau)
    c2 = loading_c(lam2, gamma2, tau)
    out = float(np.sqrt(c1 * c1 + c2 * c2 + 2.0 * c1 * c2 * rho))
    if out < 1e-300:
        raise DegenerateLoadingError("both loadings vanish; normalizer is zero")
    return out


def g2_unit_loadings(params: G2Params, tau: float) -> tuple[float, float]:
    """Normalized loadings (c1, c2) of a G2 side: c(a,sigma,tau)/d, c(b,eta,tau)/d."""
    dd = normalizer_d(params.a, params.b, params.sigma, params.eta, tau, params.rho_xy)
    return (
        loading_c(params.a, params.sigma, tau) / dd,
        loading_c(params.b, params.eta, tau) / dd,
    )


@dataclass(frozen=True)
class CoefficientSystem:
    """Small linear system mapping instantaneous to empirical correlations."""

    matrix: np.ndarray
    rhs_labels: tuple[str, ...]
    unknown_labels: tuple[str, ...]

    @property
    def cond(self) -> float:
        return float(np.linalg.cond(self.matrix))

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return solve_dense(self.matrix, np.asarray(rhs, dtype=float))


def _check_tenor_pair(taus: Sequence[float], side: str) -> tuple[float, float]:
    if len(taus) != 2:
        raise ValueError(f"{side} needs exactly two tenors, got {list(taus)}")
    t1, t2 = float(taus[0]), float(taus[1])
    if not (t1 > 0 and t2 > 0):
        raise ValueError(f"{side} tenors must be > 0")
    if t1 == t2:
        raise ValueError(f"{side} tenors must be distinct (system is singular)")
    return t1, t2


def g2g2_system(
    params_i: G2Params,
    params_j: G2Params,
    taus_i: Sequence[float],
    taus_j: Sequence[float],
) -> CoefficientSystem:
    """4x4 system for a G2/G2 pair.

    Rows are tenor combinations (p1,q1), (p1,q2), (p2,q1), (p2,q2); unknowns
    are ordered (xx, xy, yx, yy).
    """
    tp1, tp2 = _check_tenor_pair(taus_i, "side i")
    tq1, tq2 = _check_tenor_pair(taus_j, "side j")
    A = np.zeros((4, 4))
    rows = [(tp1, tq1), (tp1, tq2), (tp2, tq1), (tp2, tq2)]
    for r, (tp, tq) in enumerate(rows):
        ci = g2_unit_loadings(params_i, tp)
        cj = g2_unit_loadings(params_j, tq)
        A[r] = np.outer(ci, cj).ravel()
    return CoefficientSystem(
        matrix=A,
        rhs_labels=tuple(f"corr(dR_i[{tp:g}], dR_j[{tq:g}])" for tp, tq in rows),
        unknown_labels=("x.x", "x.y", "y.x", "y.y"),
    )


def g2_side_system(params: G2Params, taus: Sequence[float], other: str = "s") -> CoefficientSystem:
    """2x2 system projecting one observable onto a G2 side's two factors.

    Shared by the G2/Heston columns, G1/G2 (with roles swapped) and the
    G2/SingleStateEquity log-price equation.
    """
    t1, t2 = _check_tenor_pair(taus, "G2 side")
    A = np.array([g2_unit_loadings(params, t1), g2_unit_loadings(params, t2)])
    return CoefficientSystem(
        matrix=A,
        rhs_labels=(f"corr(dR[{t1:g}], d{other})", f"corr(dR[{t2:g}], d{other})"),
        unknown_labels=(f"x.{other}", f"y.{other}"),
    )


def empirical_correlation(series_a: np.ndarray, series_b: np.ndarray) -> float:
    """Sample correlation of the first differences of two level series."""
    a = np.asarray(series_a, dtype=float)
    b = np.asarray(series_b, dtype=float)
    if a.size != b.size:
        raise ValueError("series must have equal length")
    if a.size < 3:
        raise ValueError("need at least 3 observations (2 differences)")
    da = np.diff(a)
    db = np.diff(b)
    da = da - da.mean()
    db = db - db.mean()
    denom = float(np.sqrt((da @ da) * (db @ db)))
    if denom == 0.0:
        raise ZeroVarianceError("differenced series has zero variance")
    return float((da @ db) / denom)


def proxy_variance(iv_atm_series: np.ndarray) -> np.ndarray:
    """Variance proxy: elementwise square of the short-term ATM implied vol."""
    iv = np.asarray(iv_atm_series, dtype=float)
    if np.any(iv < 0):
        raise ValueError("implied volatility must be >= 0")
    return iv * iv


@dataclass(frozen=True)
class PairEstimate:
    """Cross block for one component pair plus diagnostics.

    Entries deferred to the completion stage (missing variance series) are
    NaN in ``block`` and True in ``deferred``.
    """

    block: np.ndarray
    kind: str
    swapped: bool
    system: Optional[CoefficientSystem]
    deferred: np.ndarray
    out_of_range: bool

    @property
    def incomplete(self) -> bool:
        return bool(self.deferred.any())

    @property
    def cond(self) -> Optional[float]:
        return None if self.system is None else self.system.cond


class _DiffCache:
    """Centered differences of panel series, computed once per series."""

    def __init__(self, panel: ObservationPanel, extra: Mapping[str, np.ndarray] = ()):
        self._panel = panel
        self._extra = dict(extra or {})
        self._cache: dict[str, np.ndarray] = {}

    def has(self, key: str) -> bool:
        return key in self._extra or self._panel.has(key)

    def centered(self, key: str) -> np.ndarray:
        if key not in self._cache:
            levels = self._extra[key] if key in self._extra else self._panel.get(key)
            d = np.diff(np.asarray(levels, dtype=float))
            if d.size < 2:
                raise ValueError("need at least 3 observations (2 differences)")
            self._cache[key] = d - d.mean()
        return self._cache[key]

    def corr(self, key_a: str, key_b: str) -> float:
        da = self.centered(key_a)
        db = self.centered(key_b)
        denom = float(np.sqrt((da @ da) * (db @ db)))
        if denom == 0.0:
            raise ZeroVarianceError(f"differenced series {key_a!r} or {key_b!r} is constant")
        return float((da @ db) / denom)


def _require(diffs: _DiffCache, keys: Sequence[str]) -> None:
    missing = [k for k in keys if not diffs.has(k)]
    if missing:
        raise MissingObservableError(f"panel is missing series {missing}")


def _variance_key(diffs: _DiffCache, index: int) -> Optional[str]:
    """Key usable as a variance proxy for component ``index``, if any."""
    vk = series_key(index, "v")
    if diffs.has(vk):
        return vk
    ivk = series_key(index, "iv")
    if diffs.has(ivk):
        return ivk
    return None


def _tenor_keys(panel_diffs: _DiffCache, index: int, taus: Sequence[float]) -> list[str]:
    keys = [rate_key(index, t) for t in taus]
    _require(panel_diffs, keys)
    return keys


def estimate_pair(
    panel: ObservationPanel,
    spec_i: ComponentSpec,
    spec_j: ComponentSpec,
    index_i: int = 0,
    index_j: int = 1,
    tenors_i: Optional[Sequence[float]] = None,
    tenors_j: Optional[Sequence[float]] = None,
) -> PairEstimate:
    """Estimate the cross block between two components from a panel.

    ``index_i``/``index_j`` locate the components' series keys in the panel;
    tenors default to the spot-rate tenors available there. Missing variance
    series defer the affected entries to completion (NaN + deferred flag);
    any other missing observable raises MissingObservableError.
    """
    diffs = _make_diffs(panel)
    return _estimate_pair(diffs, panel, spec_i, spec_j, index_i, index_j, tenors_i, tenors_j)


def _make_diffs(panel: ObservationPanel) -> _DiffCache:
    """Diff cache with implied-vol series squared into variance proxies."""
    extra = {}
    seen = set()
    for key in panel.keys():
        comp, kind, _ = parse_key(key)
        if kind == "iv" and comp not in seen:
            seen.add(comp)
            vk = series_key(comp, "v")
            if not panel.has(vk):
                extra[vk] = proxy_variance(panel.get(key))
    return _DiffCache(panel, extra)


def _pick_tenors(panel: ObservationPanel, index: int, need: int,
                 given: Optional[Sequence[float]]) -> list[float]:
    if given is not None:
        taus = [float(t) for t in given]
    else:
        taus = panel.rate_tenors(index)
    if len(taus) < need:
        raise MissingObservableError(
            f"component {index} needs {need} spot-rate tenor(s), found {taus}"
        )
    return taus[:need]


def _estimate_pair(diffs, panel, spec_i, spec_j, index_i, index_j, tenors_i, tenors_j):
    kind, swapped = pair_kind_for(spec_i.kind, spec_j.kind)
    if swapped:
        inner = _estimate_pair(diffs, panel, spec_j, spec_i, index_j, index_i,
                               tenors_j, tenors_i)
        return PairEstimate(
            block=inner.block.T.copy(),
            kind=inner.kind,
            swapped=True,
            system=inner.system,
            deferred=inner.deferred.T.copy(),
            out_of_range=inner.out_of_range,
        )

    system = None

    if kind == PAIR_G2G2:
        ti = _pick_tenors(panel, index_i, 2, tenors_i)
        tj = _pick_tenors(panel, index_j, 2, tenors_j)
        ki = _tenor_keys(diffs, index_i, ti)
        kj = _tenor_keys(diffs, index_j, tj)
        system = g2g2_system(spec_i.params, spec_j.params, ti, tj)
        rhs = np.array([diffs.corr(a, b) for a in ki for b in kj])
        block = system.solve(rhs).reshape(2, 2)
        deferred = np.zeros((2, 2), dtype=bool)

    elif kind == PAIR_G2HESTON:
        ti = _pick_tenors(panel, index_i, 2, tenors_i)
        ki = _tenor_keys(diffs, index_i, ti)
        sk = series_key(index_j, "s")
        _require(diffs, [sk])
        system = g2_side_system(spec_i.params, ti)
        block = np.full((2, 2), np.nan)
        deferred = np.zeros((2, 2), dtype=bool)
        block[:, 0] = system.solve(np.array([diffs.corr(k, sk) for k in ki]))
        vk = _variance_key(diffs, index_j)
        if vk is None:
            deferred[:, 1] = True
        else:
            block[:, 1] = system.solve(np.array([diffs.corr(k, vk) for k in ki]))

    elif kind == PAIR_HESTONHESTON:
        si, sj = series_key(index_i, "s"), series_key(index_j, "s")
        _require(diffs, [si, sj])
        vi, vj = _variance_key(diffs, index_i), _variance_key(diffs, index_j)
        block = np.full((2, 2), np.nan)
        deferred = np.zeros((2, 2), dtype=bool)
        block[0, 0] = diffs.corr(si, sj)
        if vi is None:
            deferred[1, :] = True
        else:
            block[1, 0] = diffs.corr(vi, sj)
        if vj is None:
            deferred[:, 1] = True
        else:
            block[0, 1] = diffs.corr(si, vj)
            if vi is not None:
                block[1, 1] = diffs.corr(vi, vj)

    elif kind == PAIR_G1G1:
        ti = _pick_tenors(panel, index_i, 1, tenors_i)
        tj = _pick_tenors(panel, index_j, 1, tenors_j)
        ki = _tenor_keys(diffs, index_i, ti)
        kj = _tenor_keys(diffs, index_j, tj)
        block = np.array([[diffs.corr(ki[0], kj[0])]])
        deferred = np.zeros((1, 1), dtype=bool)

    elif kind == PAIR_G1G2:
        ti = _pick_tenors(panel, index_i, 1, tenors_i)
        tj = _pick_tenors(panel, index_j, 2, tenors_j)
        ki = _tenor_keys(diffs, index_i, ti)
        kj = _tenor_keys(diffs, index_j, tj)
        system = g2_side_system(spec_j.params, tj, other="R_i")
        rhs = np.array([diffs.corr(ki[0], k) for k in kj])
        block = system.solve(rhs).reshape(1, 2)
        deferred = np.zeros((1, 2), dtype=bool)

    elif kind == PAIR_G1HESTON:
        ti = _pick_tenors(panel, index_i, 1, tenors_i)
        ki = _tenor_keys(diffs, index_i, ti)
        sk = series_key(index_j, "s")
        _require(diffs, [sk])
        block = np.full((1, 2), np.nan)
        deferred = np.zeros((1, 2), dtype=bool)
        block[0, 0] = diffs.corr(ki[0], sk)
        vk = _variance_key(diffs, index_j)
        if vk is None:
            deferred[0, 1] = True
        else:
            block[0, 1] = diffs.corr(ki[0], vk)

    elif kind == PAIR_G2SINGLE:
        ti = _pick_tenors(panel, index_i, 2, tenors_i)
        ki = _tenor_keys(diffs, index_i, ti)
        sk = series_key(index_j, "s")
        _require(diffs, [sk])
        system = g2_side_system(spec_i.params, ti)
        block = system.solve(np.array([diffs.corr(k, sk) for k in ki])).reshape(2, 1)
        deferred = np.zeros((2, 1), dtype=bool)

    elif kind == PAIR_G1SINGLE:
        ti = _pick_tenors(panel, index_i, 1, tenors_i)
        ki = _tenor_keys(diffs, index_i, ti)
        sk = series_key(index_j, "s")
        _require(diffs, [sk])
        block = np.array([[diffs.corr(ki[0], sk)]])
        deferred = np.zeros((1, 1), dtype=bool)

    else:  # pragma: no cover - pair_kind_for already rejects these
        raise ValueError(f"unsupported pair kind {kind}")

    finite = block[~deferred]
    out_of_range = bool(np.any(np.abs(finite) > 1.0))
    return PairEstimate(
        block=block,
        kind=kind,
        swapped=False,
        system=system,
        deferred=deferred,
        out_of_range=out_of_range,
    )


@dataclass(frozen=True)
class EstimateAllResult:
    """Draft matrix with diagnostics; deferred entries are NaN + masked."""

    draft: BlockCorrelationMatrix
    missing_mask: np.ndarray
    pairs: Mapping[tuple[int, int], PairEstimate]
    warnings: tuple[str, ...] = field(default_factory=tuple)

    @property
    def out_of_range(self) -> bool:
        return any(p.out_of_range for p in self.pairs.values())

    @property
    def incomplete(self) -> bool:
        return bool(self.missing_mask.any())


def estimate_all(
    panel: ObservationPanel,
    system_spec: HybridSystemSpec,
    tenor_map: Optional[Mapping[int, Sequence[float]]] = None,
) -> EstimateAllResult:
    """Estimate every cross block and assemble the draft matrix.

    Diagonal blocks come from the spec's calibrated inner correlations; the
    tenor map (component index -> tenors) defaults to whatever spot-rate
    series the panel carries per component.
    """
    comps = system_spec.components
    diffs = _make_diffs(panel)
    warnings = []
    ratio = panel.spacing_ratio()
    if ratio > SPACING_WARN_RATIO:
        warnings.append(f"irregular time grid: max/min spacing ratio {ratio:.2f}")

    def tenors_for(idx):
        if tenor_map is not None and idx in tenor_map:
            return tenor_map[idx]
        return None

    pairs: dict[tuple[int, int], PairEstimate] = {}
    cross = {}
    for i in range(len(comps)):
        for j in range(i + 1, len(comps)):
            est = _estimate_pair(diffs, panel, comps[i], comps[j], i, j,
                                 tenors_for(i), tenors_for(j))
            pairs[(i, j)] = est
            cross[(i, j)] = est.block
            if est.cond is not None and est.cond > COND_WARN_THRESHOLD:
                warnings.append(
                    f"pair ({i},{j}): ill-conditioned system (cond={est.cond:.3e})"
                )
            if est.out_of_range:
                warnings.append(f"pair ({i},{j}): estimate outside [-1, 1]")
            if est.incomplete:
                warnings.append(f"pair ({i},{j}): variance entries deferred to completion")

    draft = assemble_block_matrix(
        system_spec.diagonal_blocks(), cross, labels=system_spec.state_labels
    )
    mask = np.isnan(draft.entries)
    return EstimateAllResult(
        draft=draft, missing_mask=mask, pairs=pairs, warnings=tuple(warnings)
    )
