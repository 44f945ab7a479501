"""Model parameterizations and hybrid-system descriptions.

Component models
----------------
G2 (two-factor additive Gaussian short rate):
    r(t) = x(t) + y(t)            (deterministic shift fixed to zero)
    dx = -a x dt + sigma dW^x,    x0 = 0
    dy = -b y dt + eta   dW^y,    y0 = 0
    corr(dW^x, dW^y) = rho_xy

G1 is the one-factor degenerate case (x only).

Heston (log price s = log S and stochastic variance v):
    ds = (r_tilde - q_tilde - v/2) dt + sqrt(v) dW^s
    dv = kappa (theta - v) dt + xi sqrt(v) dW^v
    corr(dW^s, dW^v) = rho_sv

Bates adds an independent lognormal jump overlay on s. SingleStateEquity is
a one-state log-price component (local-vol style) used for estimation only.

All records are frozen dataclasses: immutable after construction and safe
to share across threads. Construction never raises on bad values; use
``validate_system`` to collect violations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

# Component kind tags. Bates estimates like Heston; Single like a one-state
# equity (Dupire estimation path).
KIND_G1 = "G1"
KIND_G2 = "G2"
KIND_HESTON = "Heston"
KIND_BATES = "Bates"
KIND_SINGLE = "SingleStateEquity"

_STATE_LABELS = {
    KIND_G1: ("x",),
    KIND_G2: ("x", "y"),
    KIND_HESTON: ("s", "v"),
    KIND_BATES: ("s", "v"),
    KIND_SINGLE: ("s",),
}


@dataclass(frozen=True)
class G2Params:
    """Two-factor Gaussian short-rate parameters (rates per year)."""

    a: float
    b: float
    sigma: float
    eta: float
    rho_xy: float

    def violations(self, where: str = "") -> list[str]:
        out = []
        for name in ("a", "b", "sigma", "eta"):
            if not getattr(self, name) > 0:
                out.append(f"{where}{name} must be > 0")
        if not -1.0 <= self.rho_xy <= 1.0:
            out.append(f"{where}rho_xy must be in [-1, 1]")
        return out

    def scaled(self, factor: float) -> "G2Params":
        """All five parameters scaled by ``factor`` (rho clipped to [-1, 1]).

        Used to model miscalibrated rate parameters in robustness studies.
        """
        return G2Params(
            a=self.a * factor,
            b=self.b * factor,
            sigma=self.sigma * factor,
            eta=self.eta * factor,
            rho_xy=float(np.clip(self.rho_xy * factor, -1.0, 1.0)),
        )


@dataclass(frozen=True)
class G1Params:
    """One-factor Gaussian short-rate parameters."""

    a: float
    sigma: float

    def violations(self, where: str = "") -> list[str]:
        out = []
        if not self.a > 0:
            out.append(f"{where}a must be > 0")
        if not self.sigma > 0:
            out.append(f"{where}sigma must be > 0")
        return out

    def scaled(self, factor: float) -> "G1Params":
        return G1Params(a=self.a * factor, sigma=self.sigma * factor)


@dataclass(frozen=True)
class HestonParams:
    """Heston parameters; r_tilde and q_tilde are deterministic constants."""

    kappa: float
    theta: float
    xi: float
    v0: float
    rho_sv: float
    r_tilde: float = 0.0
    q_tilde: float = 0.0

    def violations(self, where: str = "") -> list[str]:
        out = []
        for name in ("kappa", "theta", "xi", "v0"):
            if not getattr(self, name) > 0:
                out.append(f"{where}{name} must be > 0")
        if not -1.0 <= self.rho_sv <= 1.0:
            out.append(f"{where}rho_sv must be in [-1, 1]")
        return out

    @property
    def feller_satisfied(self) -> bool:
        """2*kappa*theta > xi**2 keeps the variance strictly positive."""
        return 2.0 * self.kappa * self.theta > self.xi**2


@dataclass(frozen=True)
class BatesJumpParams:
    """Lognormal jump overlay: Poisson(lam) arrivals, log sizes N(mu_j, sigma_j^2)."""

    lam: float
    mu_j: float
    sigma_j: float

    def violations(self, where: str = "") -> list[str]:
        out = []
        if self.lam < 0:
            out.append(f"{where}lam must be >= 0")
        if self.sigma_j < 0:
            out.append(f"{where}sigma_j must be >= 0")
        return out

    @property
    def compensator(self) -> float:
        """Drift compensator lam * (exp(mu_j + sigma_j^2 / 2) - 1)."""
        return self.lam * (np.expm1(self.mu_j + 0.5 * self.sigma_j**2))


ParamRecord = Union[G2Params, G1Params, HestonParams, BatesJumpParams, None]

_EXPECTED_PARAMS = {
    KIND_G1: G1Params,
    KIND_G2: G2Params,
    KIND_HESTON: HestonParams,
    KIND_BATES: HestonParams,
    KIND_SINGLE: type(None),
}


@dataclass(frozen=True)
class ComponentSpec:
    """One component model: a kind tag plus its parameter record.

    Bates carries HestonParams in ``params`` and the jump overlay in
    ``jump``. SingleStateEquity has no parameters (params=None).
    """

    kind: str
    params: ParamRecord = None
    jump: Optional[BatesJumpParams] = None

    @property
    def state_labels(self) -> tuple[str, ...]:
        return _STATE_LABELS[self.kind]

    @property
    def n_states(self) -> int:
        return len(_STATE_LABELS[self.kind])

    @property
    def inner_rho(self) -> float:
        """Within-component instantaneous correlation (0 for one-state kinds)."""
        if self.kind == KIND_G2:
            return self.params.rho_xy
        if self.kind in (KIND_HESTON, KIND_BATES):
            return self.params.rho_sv
        return 0.0

    def diagonal_block(self) -> np.ndarray:
        """Within-component correlation block implied by the calibrated inner rho."""
        n = self.n_states
        if n == 1:
            return np.ones((1, 1))
        r = self.inner_rho
        return np.array([[1.0, r], [r, 1.0]])

    def violations(self, where: str = "") -> list[str]:
        out = []
        if self.kind not in _STATE_LABELS:
            return [f"{where}unknown component kind {self.kind!r}"]
        expected = _EXPECTED_PARAMS[self.kind]
        if not isinstance(self.params, expected):
            out.append(
                f"{where}kind {self.kind} requires params of type "
                f"{expected.__name__}, got {type(self.params).__name__}"
            )
            return out
        if self.params is not None:
            out.extend(self.params.violations(where))
        if self.kind == KIND_BATES:
            if self.jump is None:
                out.append(f"{where}Bates component requires jump parameters")
            else:
                out.extend(self.jump.violations(where))
        elif self.jump is not None:
            out.append(f"{where}jump parameters only valid for Bates components")
        return out


@dataclass(frozen=True)
class HybridSystemSpec:
    """Ordered component list plus, optionally, the full correlation matrix.

    With ``full_matrix`` set the spec is a simulation input; without it only
    the diagonal blocks (derived from each component's inner correlation)
    are known and the cross blocks are to be estimated.
    """

    components: tuple[ComponentSpec, ...]
    full_matrix: Optional[np.ndarray] = None

    def __init__(self, components, full_matrix=None):
        object.__setattr__(self, "components", tuple(components))
        if full_matrix is not None:
            full_matrix = np.asarray(full_matrix, dtype=float)
        object.__setattr__(self, "full_matrix", full_matrix)

    @property
    def block_sizes(self) -> tuple[int, ...]:
        return tuple(c.n_states for c in self.components)

    @property
    def n_states(self) -> int:
        return sum(self.block_sizes)

    @property
    def state_labels(self) -> tuple[str, ...]:
        return tuple(
            f"{i}.{s}" for i, c in enumerate(self.components) for s in c.state_labels
        )

    def diagonal_blocks(self) -> list[np.ndarray]:
        return [c.diagonal_block() for c in self.components]


def validate_system(spec: HybridSystemSpec, sym_tol: float = 1e-12) -> list[str]:
    """Collect invariant violations; empty list means the spec is valid.

    Checks every component's parameter invariants and, when a full matrix is
    supplied, that it is square of the right size, symmetric to ``sym_tol``,
    has a unit diagonal and entries in [-1, 1].
    """
    out = []
    for i, comp in enumerate(spec.components):
        out.extend(comp.violations(where=f"component {i}: "))
    M = spec.full_matrix
    if M is not None:
        n = spec.n_states
        if M.shape != (n, n):
            out.append(f"full matrix shape {M.shape} does not match {n} states")
            return out
        if not np.all(np.isfinite(M)):
            out.append("full matrix has non-finite entries")
            return out
        if np.abs(M - M.T).max() > sym_tol:
            out.append(f"full matrix not symmetric to {sym_tol:g}")
        if np.abs(np.diag(M) - 1.0).max() > sym_tol:
            out.append("full matrix diagonal must be 1")
        if np.abs(M).max() > 1.0 + sym_tol:
            out.append("full matrix entry outside [-1, 1]")
    return out
