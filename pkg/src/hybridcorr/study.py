"""Monte Carlo study harness: bias and standard error of the estimators.

For each trial a hybrid system is simulated on an n-step grid, the cross
correlations are re-estimated from the derived panel, and across trials the
per-entry bias (mean estimate minus truth) and standard error (sample stdev)
are reported.

Rate observables are built directly from the driving Brownian levels via the
factor loadings (the representation underlying the rate estimator, with the
finite-variation level term dropped). Sample correlations are scale
invariant, so this changes nothing statistically, and it makes the pure-rate
estimates exactly free of the step size: the same seeds give bitwise equal
G2/G2 results for intraday and daily grids. Heston components are stepped
with full-truncation Euler and genuinely feel dt, which is the point of the
intraday/daily comparison.

Misspecification: the estimation stage can run with all rate-model
parameters (mean reversions, vols and the inner correlation) scaled by a
common factor while the data keep the true ones.
"""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import partial
from typing import Mapping, Optional, Sequence

import numpy as np

from .blockmatrix import BlockCorrelationMatrix, assemble_block_matrix
from .estimate import estimate_all, loading_c
from .linsolve import SingularSystemError
from .models import (
    KIND_BATES,
    KIND_G1,
    KIND_G2,
    KIND_HESTON,
    ComponentSpec,
    G2Params,
    HestonParams,
    HybridSystemSpec,
    validate_system,
)
from .panel import ObservationPanel, rate_key, series_key
from .simulate import DEFAULT_TENORS, correlation_factor, make_rng, simulate_heston

DT_INTRADAY = 0.01 / 250.0   # 4-minute snapshots on a 6.5h trading day
DT_DAILY = 1.0 / 250.0

PRESET_NAMES = ("g2g2", "g2heston", "hestonheston")


def table_presets(name: str) -> HybridSystemSpec:
    """Reference two-component systems used throughout the numerical study."""
    if name == "g2g2":
        comps = (
            ComponentSpec(KIND_G2, G2Params(a=0.1, b=0.2, sigma=0.01, eta=0.02, rho_xy=0.5)),
            ComponentSpec(KIND_G2, G2Params(a=0.15, b=0.25, sigma=0.015, eta=0.025, rho_xy=0.55)),
        )
        cross = [[0.1, 0.2], [0.3, 0.4]]
    elif name == "g2heston":
        comps = (
            ComponentSpec(KIND_G2, G2Params(a=0.1, b=0.2, sigma=0.01, eta=0.02, rho_xy=0.5)),
            ComponentSpec(KIND_HESTON, HestonParams(kappa=1.0, theta=0.2, xi=0.3, v0=0.1, rho_sv=-0.8)),
        )
        cross = [[0.1, -0.2], [0.3, -0.4]]
    elif name == "hestonheston":
        comps = (
            ComponentSpec(KIND_HESTON, HestonParams(kappa=1.0, theta=0.2, xi=0.3, v0=0.1, rho_sv=-0.8)),
            ComponentSpec(KIND_HESTON, HestonParams(kappa=1.1, theta=0.22, xi=0.33, v0=0.11, rho_sv=-0.88)),
        )
        cross = [[0.1, -0.2], [-0.3, 0.4]]
    else:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    full = assemble_block_matrix([c.diagonal_block() for c in comps], {(0, 1): cross})
    return HybridSystemSpec(comps, full.entries)


@dataclass(frozen=True)
class StudyConfig:
    """One study run: system, grid, trial count, misspecification, seed."""

    system: HybridSystemSpec
    n_steps: int = 10_000
    dt: float = DT_DAILY
    n_trials: int = 1000
    misspec_factor: float = 1.0
    base_seed: int = 0
    tenor_map: Optional[Mapping[int, tuple[float, ...]]] = None
    use_iv_proxy: bool = False
    n_jobs: int = 1

    def violations(self) -> list[str]:
        out = validate_system(self.system)
        if self.system.full_matrix is None:
            out.append("study requires the true full correlation matrix")
        if self.n_steps < 1:
            out.append("n_steps must be >= 1")
        if not self.dt > 0:
            out.append("dt must be > 0")
        if self.n_trials < 2:
            out.append("n_trials must be >= 2")
        if not self.misspec_factor > 0:
            out.append("misspecification factor must be > 0")
        for comp in self.system.components:
            if comp.kind not in (KIND_G1, KIND_G2, KIND_HESTON, KIND_BATES):
                out.append(f"study cannot simulate component kind {comp.kind!r}")
        return out


@dataclass(frozen=True)
class StudyReport:
    """Per-entry bias/standard error over the successful trials."""

    entry_labels: tuple[str, ...]
    true_values: np.ndarray
    bias: np.ndarray
    stderr: np.ndarray
    n_trials: int
    n_failed: int
    runtime_seconds: float
    n_steps: int
    dt: float
    misspec_factor: float
    estimates: np.ndarray

    def entry(self, label: str) -> tuple[float, float, float]:
        """(true value, bias, stderr) for one entry label."""
        k = self.entry_labels.index(label)
        return float(self.true_values[k]), float(self.bias[k]), float(self.stderr[k])


def _cross_entry_labels(system: HybridSystemSpec) -> tuple[tuple[str, ...], np.ndarray]:
    """Row-major cross-block entry labels and their true values."""
    bcm = BlockCorrelationMatrix(system.full_matrix, system.block_sizes, system.state_labels)
    sl = bcm.block_slices()
    labels, truths = [], []
    for i in range(len(sl)):
        for j in range(i + 1, len(sl)):
            for r in range(sl[i].start, sl[i].stop):
                for c in range(sl[j].start, sl[j].stop):
                    labels.append(f"{bcm.labels[r]}~{bcm.labels[c]}")
                    truths.append(bcm.entries[r, c])
    return tuple(labels), np.array(truths)


def misspecified_components(
    components: Sequence[ComponentSpec], factor: float
) -> tuple[ComponentSpec, ...]:
    """Rate-model components with parameters scaled by ``factor``; others unchanged."""
    if factor == 1.0:
        return tuple(components)
    out = []
    for comp in components:
        if comp.kind in (KIND_G1, KIND_G2):
            out.append(replace(comp, params=comp.params.scaled(factor)))
        else:
            out.append(comp)
    return tuple(out)


def _trial_panel(
    system: HybridSystemSpec,
    factor_matrix: np.ndarray,
    n_steps: int,
    dt: float,
    rng: np.random.Generator,
    tenor_map: Mapping[int, tuple[float, ...]],
    use_iv_proxy: bool,
) -> ObservationPanel:
    """Simulate one trial and derive its observation panel.

    Correlated unit normals are drawn in a single block; rate observables are
    loading combinations of their running sums (independent of dt), Heston
    states are Euler-stepped on increments scaled by sqrt(dt).
    """
    Z = rng.standard_normal((n_steps, factor_matrix.shape[0]))
    E = Z @ factor_matrix.T

    has_heston = any(c.kind in (KIND_HESTON, KIND_BATES) for c in system.components)
    sqrt_dt = np.sqrt(dt) if has_heston else None

    series: dict[str, np.ndarray] = {}
    col = 0
    for i, comp in enumerate(system.components):
        if comp.kind in (KIND_G1, KIND_G2):
            p = comp.params
            w_x = np.concatenate([[0.0], np.cumsum(E[:, col])])
            if comp.kind == KIND_G2:
                w_y = np.concatenate([[0.0], np.cumsum(E[:, col + 1])])
                for tau in tenor_map.get(i, DEFAULT_TENORS)[:2]:
                    series[rate_key(i, tau)] = (
                        loading_c(p.a, p.sigma, tau) * w_x + loading_c(p.b, p.eta, tau) * w_y
                    )
            else:
                for tau in tenor_map.get(i, DEFAULT_TENORS)[:1]:
                    series[rate_key(i, tau)] = loading_c(p.a, p.sigma, tau) * w_x
        else:
            s, v = simulate_heston(
                comp.params,
                comp.jump if comp.kind == KIND_BATES else None,
                sqrt_dt * E[:, col],
                sqrt_dt * E[:, col + 1],
                dt,
                rng=rng,
            )
            series[series_key(i, "s")] = s
            if use_iv_proxy:
                series[series_key(i, "iv")] = np.sqrt(v)
            else:
                series[series_key(i, "v")] = v
        col += comp.n_states

    times = np.arange(n_steps + 1) * dt
    return ObservationPanel(times, series)


def _run_trial(payload: dict, trial: int):
    """One trial: simulate, estimate, return the cross-entry vector."""
    rng = make_rng(payload["base_seed"], stream=trial)
    try:
        panel = _trial_panel(
            payload["system"], payload["factor_matrix"], payload["n_steps"],
            payload["dt"], rng, payload["tenor_map"], payload["use_iv_proxy"],
        )
        result = estimate_all(panel, payload["est_system"], payload["tenor_map"])
        draft = result.draft
        sl = draft.block_slices()
        vals = []
        for i in range(len(sl)):
            for j in range(i + 1, len(sl)):
                vals.extend(draft.entries[sl[i], sl[j]].ravel())
        return np.array(vals), None
    except (SingularSystemError, ValueError) as exc:
        return None, f"trial {trial}: {exc}"


def run_study(config: StudyConfig) -> StudyReport:
    """Run the Monte Carlo study described by ``config``.

    Trials own independent counter-based streams derived from
    (base_seed, trial index), so the report does not depend on the degree of
    parallelism; aggregation always happens in trial order. Raises
    RuntimeError if more than 10% of trials fail.
    """
    problems = config.violations()
    if problems:
        raise ValueError("; ".join(problems))

    t0 = time.perf_counter()
    labels, truths = _cross_entry_labels(config.system)
    tenor_map = {i: tuple(t) for i, t in (config.tenor_map or {}).items()}
    for i, comp in enumerate(config.system.components):
        if comp.kind in (KIND_G1, KIND_G2):
            tenor_map.setdefault(i, DEFAULT_TENORS)

    est_system = HybridSystemSpec(
        misspecified_components(config.system.components, config.misspec_factor)
    )
    payload = {
        "system": config.system,
        "est_system": est_system,
        "factor_matrix": correlation_factor(config.system.full_matrix),
        "n_steps": config.n_steps,
        "dt": config.dt,
        "base_seed": config.base_seed,
        "tenor_map": tenor_map,
        "use_iv_proxy": config.use_iv_proxy,
    }

    worker = partial(_run_trial, payload)
    if config.n_jobs > 1:
        chunk = max(1, config.n_trials // (config.n_jobs * 8))
        with ProcessPoolExecutor(max_workers=config.n_jobs) as pool:
            outcomes = list(pool.map(worker, range(config.n_trials), chunksize=chunk))
    else:
        outcomes = [worker(m) for m in range(config.n_trials)]

    rows = [vec for vec, _ in outcomes if vec is not None]
    failures = [msg for _, msg in outcomes if msg is not None]
    if len(rows) < 0.9 * config.n_trials:
        raise RuntimeError(
            f"{len(failures)} of {config.n_trials} trials failed; first: {failures[0]}"
        )

    estimates = np.array(rows)
    bias = estimates.mean(axis=0) - truths
    stderr = estimates.std(axis=0, ddof=1)
    return StudyReport(
        entry_labels=labels,
        true_values=truths,
        bias=bias,
        stderr=stderr,
        n_trials=config.n_trials,
        n_failed=len(failures),
        runtime_seconds=time.perf_counter() - t0,
        n_steps=config.n_steps,
        dt=config.dt,
        misspec_factor=config.misspec_factor,
        estimates=estimates,
    )


def emit_table(report: StudyReport, fmt: str = "text") -> str:
    """Render a report as a study table (bias on top, stderr beneath) or CSV."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["entry", "true_value", "bias", "stderr"])
        for k, lab in enumerate(report.entry_labels):
            w.writerow([
                lab,
                f"{report.true_values[k]:.17g}",
                f"{report.bias[k]:.17g}",
                f"{report.stderr[k]:.17g}",
            ])
        return buf.getvalue()
    if fmt != "text":
        raise ValueError(f"unknown table format {fmt!r}")

    header = ["n steps"] + [
        f"{lab} {tv * 100:g}%" for lab, tv in zip(report.entry_labels, report.true_values)
    ]
    widths = [max(12, len(h) + 2) for h in header]
    lines = ["".join(h.ljust(w) for h, w in zip(header, widths))]
    if report.entry_labels:
        bias_cells = [f"{report.n_steps:,}"] + [f"{b * 100:.2f}%" for b in report.bias]
        se_cells = [""] + [f"({s * 100:.2f}%)" for s in report.stderr]
        lines.append("".join(c.ljust(w) for c, w in zip(bias_cells, widths)))
        lines.append("".join(c.ljust(w) for c, w in zip(se_cells, widths)))
    return "\n".join(lines) + "\n"
