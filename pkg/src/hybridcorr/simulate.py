"""Correlated path simulation and observable-panel derivation.

Rate factors use the exact OU transition (no discretization error):

    x[k+1] = x[k] exp(-a dt) + sigma sqrt((1 - exp(-2 a dt)) / (2 a)) Z[k]

Heston variance/log-price use full-truncation Euler: the internal variance
state may dip below zero but drift and diffusion read its positive part, and
stored paths are floored at zero. Bates jumps enter the log price only.

Reproducibility contract: streams are Philox counter-based; the stream for
trial m of base seed s is derived via SeedSequence(s, spawn_key=(m,)), so
results do not depend on execution order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .backend import kernels
from .blockmatrix import BlockCorrelationMatrix
from .models import (
    KIND_BATES,
    KIND_G1,
    KIND_G2,
    KIND_HESTON,
    BatesJumpParams,
    G1Params,
    G2Params,
    HestonParams,
    HybridSystemSpec,
    validate_system,
)
from .panel import ObservationPanel, rate_key, series_key
from .repair import is_psd

DEFAULT_TENORS = (10.0, 30.0)


@dataclass(frozen=True)
class SimulationConfig:
    """Grid, seed and scheme options for one simulation run."""

    n_steps: int
    dt: float
    seed: int
    couple_short_rate: bool = False   # Heston drift reads the simulated short rate
    sigma_zero_tol: float = 0.0       # treat OU sigma <= tol as exactly zero noise

    def violations(self) -> list[str]:
        out = []
        if self.n_steps < 1:
            out.append("n_steps must be >= 1")
        if not self.dt > 0:
            out.append("dt must be > 0")
        return out


@dataclass(frozen=True)
class PathSet:
    """Per-state simulated paths plus the derived observation panel."""

    values: Mapping[str, np.ndarray]
    panel: ObservationPanel
    config: SimulationConfig


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for (seed, stream); order-independent."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(stream,))))


def correlation_factor(matrix: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Factor F with F F^T = matrix, for correlating standard normals.

    Cholesky when positive definite; symmetric-eigendecomposition square
    root with negative eigenvalues clipped at zero for singular PSD inputs
    (e.g. perfectly correlated states). Raises ValueError when the input is
    not positive semidefinite.
    """
    M = np.asarray(matrix, dtype=float)
    if not is_psd(M, tol):
        raise ValueError("correlation matrix is not positive semidefinite")
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh((M + M.T) / 2.0)
        return V * np.sqrt(np.clip(w, 0.0, None))


def correlated_increments(
    full_matrix: BlockCorrelationMatrix | np.ndarray,
    n_steps: int,
    dt: float,
    seed: int | np.random.Generator,
) -> np.ndarray:
    """(n_steps, n_states) Brownian increments with covariance dt * matrix.

    Deterministic given the seed; ``seed`` may also be a Generator so a
    caller can keep drawing from the same stream afterwards.
    """
    M = full_matrix.entries if isinstance(full_matrix, BlockCorrelationMatrix) else full_matrix
    F = correlation_factor(M)
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    Z = rng.standard_normal((n_steps, M.shape[0]))
    return np.sqrt(dt) * (Z @ F.T)


def simulate_g2(
    params: G2Params,
    dw_x: np.ndarray,
    dw_y: np.ndarray,
    dt: float,
    sigma_zero_tol: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """OU factor paths (length n+1, starting at 0) from Brownian increments."""
    x = _ou_path(params.a, params.sigma, dw_x, dt, sigma_zero_tol)
    y = _ou_path(params.b, params.eta, dw_y, dt, sigma_zero_tol)
    return x, y


def _ou_path(rate, vol, dw, dt, sigma_zero_tol=0.0):
    dw = np.asarray(dw, dtype=float)
    decay = np.exp(-rate * dt)
    scale = 0.0 if vol <= sigma_zero_tol else vol * np.sqrt(-np.expm1(-2.0 * rate * dt) / (2.0 * rate))
    z = dw / np.sqrt(dt)
    return kernels.ou_exact_path(decay, scale, z)


def ou_step_stdev(rate: float, vol: float, dt: float) -> float:
    """Conditional one-step standard deviation of the exact OU transition."""
    return vol * np.sqrt(-np.expm1(-2.0 * rate * dt) / (2.0 * rate))


def rate_loading(rate: float, tau: float) -> float:
    """(1 - exp(-rate * tau)) / (rate * tau), the spot-rate factor loading."""
    return -np.expm1(-rate * tau) / (rate * tau)


def spot_rate_path(
    x: np.ndarray,
    y: Optional[np.ndarray],
    params: G2Params | G1Params,
    tau: float,
) -> np.ndarray:
    """Continuously compounded spot rate of tenor tau from the factor paths.

    R^tau(t) = (1 - e^{-a tau}) x_t / (a tau) + (1 - e^{-b tau}) y_t / (b tau),
    with the finite-variation level term dropped (irrelevant to differenced
    correlations). The one-factor case uses the x term only.
    """
    if not tau > 0:
        raise ValueError("tenor must be > 0")
    R = rate_loading(params.a, tau) * np.asarray(x, dtype=float)
    if isinstance(params, G2Params):
        if y is None:
            raise ValueError("G2 spot rate needs both factor paths")
        R = R + rate_loading(params.b, tau) * np.asarray(y, dtype=float)
    return R


def simulate_heston(
    params: HestonParams,
    jump: Optional[BatesJumpParams],
    dw_s: np.ndarray,
    dw_v: np.ndarray,
    dt: float,
    short_rate_path: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
    s0: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Log-price and variance paths (length n+1) from Brownian increments.

    With ``short_rate_path`` (levels on the same grid) the drift uses the
    simulated short rate instead of the constant r_tilde. Jump randomness is
    drawn from ``rng``; per step the compound Poisson sum is realized as
    mu_j * N + sigma_j * sqrt(N) * Z with N ~ Poisson(lam * dt).
    """
    dw_s = np.asarray(dw_s, dtype=float)
    dw_v = np.asarray(dw_v, dtype=float)
    n = dw_s.size
    if dw_v.size != n:
        raise ValueError("price and variance increments must have equal length")

    jumps = None
    compensator = 0.0
    if jump is not None and jump.lam > 0.0:
        if rng is None:
            raise ValueError("jump simulation requires an rng")
        compensator = jump.compensator
        counts = rng.poisson(jump.lam * dt, size=n)
        z = rng.standard_normal(n)
        jumps = jump.mu_j * counts + jump.sigma_j * np.sqrt(counts) * z

    if short_rate_path is not None:
        r = np.asarray(short_rate_path, dtype=float)
        if r.size not in (n, n + 1):
            raise ValueError("short rate path length must match the step grid")
        base = r[:n] - params.q_tilde - compensator
    else:
        base = np.full(n, params.r_tilde - params.q_tilde - compensator)

    return kernels.heston_full_truncation(
        s0, params.v0, dt, params.kappa, params.theta, params.xi,
        base, dw_s, dw_v, jumps,
    )


def simulate_system(
    spec: HybridSystemSpec,
    config: SimulationConfig,
    tenor_map: Optional[Mapping[int, Sequence[float]]] = None,
) -> PathSet:
    """Simulate every component on a common grid and derive the panel.

    The panel holds, per component: spot rates for each tenor in
    ``tenor_map`` (default two tenors of 10 and 30 years) for rate models,
    and log price plus variance for Heston/Bates. Deterministic given
    (spec, config): Gaussian increments are drawn in one block, then jump
    variables per Bates component in component order.
    """
    problems = validate_system(spec) + config.violations()
    if spec.full_matrix is None:
        problems.append("simulation requires the full correlation matrix")
    if problems:
        raise ValueError("; ".join(problems))

    rng = make_rng(config.seed)
    increments = correlated_increments(spec.full_matrix, config.n_steps, config.dt, rng)
    times = np.arange(config.n_steps + 1) * config.dt

    values: dict[str, np.ndarray] = {}
    series: dict[str, np.ndarray] = {}
    rate_levels: Optional[np.ndarray] = None

    # First pass: rate components (a Heston drift may couple to the first one).
    col = 0
    col_of = []
    for i, comp in enumerate(spec.components):
        col_of.append(col)
        if comp.kind == KIND_G2:
            x, y = simulate_g2(
                comp.params, increments[:, col], increments[:, col + 1],
                config.dt, config.sigma_zero_tol,
            )
            values[f"{i}.x"] = x
            values[f"{i}.y"] = y
            if rate_levels is None:
                rate_levels = x + y
        elif comp.kind == KIND_G1:
            x = _ou_path(comp.params.a, comp.params.sigma, increments[:, col],
                         config.dt, config.sigma_zero_tol)
            values[f"{i}.x"] = x
            if rate_levels is None:
                rate_levels = x
        col += comp.n_states

    if config.couple_short_rate and rate_levels is None:
        raise ValueError("short-rate coupling requires a rate component")

    for i, comp in enumerate(spec.components):
        col = col_of[i]
        if comp.kind in (KIND_HESTON, KIND_BATES):
            s, v = simulate_heston(
                comp.params,
                comp.jump if comp.kind == KIND_BATES else None,
                increments[:, col], increments[:, col + 1],
                config.dt,
                short_rate_path=rate_levels if config.couple_short_rate else None,
                rng=rng,
            )
            values[f"{i}.s"] = s
            values[f"{i}.v"] = v
            series[series_key(i, "s")] = s
            series[series_key(i, "v")] = v
        elif comp.kind in (KIND_G1, KIND_G2):
            taus = tuple((tenor_map or {}).get(i, DEFAULT_TENORS))
            need = 2 if comp.kind == KIND_G2 else 1
            taus = taus[:need] if len(taus) >= need else taus
            x = values[f"{i}.x"]
            y = values.get(f"{i}.y")
            for tau in taus:
                series[rate_key(i, tau)] = spot_rate_path(x, y, comp.params, tau)
        else:
            raise ValueError(f"cannot simulate component kind {comp.kind!r}")

    return PathSet(values=values, panel=ObservationPanel(times, series), config=config)
