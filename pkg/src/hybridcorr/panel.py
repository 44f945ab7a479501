"""Observation panels: a time grid plus named observable series.

Series keys are structured strings so CSV headers are self-describing:

    c{i}.R[{tau}]   spot rate of component i with tenor tau (years)
    c{i}.s          log price of component i
    c{i}.v          variance proxy of component i
    c{i}.iv         short-term ATM implied volatility of component i

Example: ``c0.R[10.0]``, ``c1.s``, ``c1.v``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

_KEY_RE = re.compile(r"^c(\d+)\.(R|s|v|iv)(?:\[([^\]]+)\])?$")


def rate_key(component: int, tau: float) -> str:
    return f"c{component}.R[{tau:g}]"


def series_key(component: int, kind: str, tau: Optional[float] = None) -> str:
    if kind == "R":
        if tau is None:
            raise ValueError("spot-rate keys require a tenor")
        return rate_key(component, tau)
    return f"c{component}.{kind}"


def parse_key(key: str) -> tuple[int, str, Optional[float]]:
    """Split a series key into (component index, kind, tenor or None)."""
    m = _KEY_RE.match(key)
    if not m:
        raise ValueError(f"malformed series key {key!r}")
    comp, kind, tau = int(m.group(1)), m.group(2), m.group(3)
    if kind == "R":
        if tau is None:
            raise ValueError(f"spot-rate key {key!r} is missing its tenor")
        tau = float(tau)
        if not tau > 0:
            raise ValueError(f"spot-rate key {key!r} must have tenor > 0")
    elif tau is not None:
        raise ValueError(f"series key {key!r} does not take a tenor")
    else:
        tau = None
    return comp, kind, tau


@dataclass(frozen=True)
class ObservationPanel:
    """Strictly increasing observation times plus equally long value series."""

    times: np.ndarray
    series: Mapping[str, np.ndarray]

    def __init__(self, times, series):
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("need at least two observation times")
        if not np.all(np.diff(times) > 0):
            raise ValueError("observation times must be strictly increasing")
        clean = {}
        for key, values in series.items():
            comp, kind, tau = parse_key(key)
            canonical = series_key(comp, kind, tau)
            if canonical in clean:
                raise ValueError(f"duplicate series {canonical!r} (from {key!r})")
            values = np.asarray(values, dtype=float)
            if values.shape != times.shape:
                raise ValueError(
                    f"series {key!r} has length {values.size}, expected {times.size}"
                )
            clean[canonical] = values
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "series", clean)

    @property
    def n_obs(self) -> int:
        return self.times.size

    def keys(self) -> list[str]:
        return list(self.series.keys())

    def has(self, key: str) -> bool:
        return key in self.series

    def get(self, key: str) -> np.ndarray:
        try:
            return self.series[key]
        except KeyError:
            raise KeyError(f"panel has no series {key!r}") from None

    def rate_tenors(self, component: int) -> list[float]:
        """Tenors of the spot-rate series available for one component."""
        taus = []
        for key in self.series:
            comp, kind, tau = parse_key(key)
            if comp == component and kind == "R":
                taus.append(tau)
        return sorted(taus)

    def spacing_ratio(self) -> float:
        """max/min grid spacing; > 10 is flagged as a warning upstream."""
        d = np.diff(self.times)
        return float(d.max() / d.min())
