"""Scenario configuration, Rician channel generation and SIC user ordering."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields, replace
from typing import Any, Mapping, Sequence

import numpy as np

# RNG stream tags keep the LoS-angle stream disjoint from per-trial streams.
_TAG_ANGLES = 0x105
_TAG_TRIAL = 0x7121


def dbm_to_watts(x_dbm: float) -> float:
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def path_loss(d: float, alpha: float, eta0: float) -> float:
    """Linear power gain ``eta0 * (d / 1 m) ** -alpha``."""
    if not d > 0:
        raise ValueError(f"distance must be positive, got {d!r}")
    if not eta0 > 0:
        raise ValueError(f"eta0 must be positive, got {eta0!r}")
    return eta0 * d ** (-alpha)


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical parameters of one IRS-assisted uplink cluster.

    Per-user sequences (``d_UI``, ``d_UB``, ``R_min``) are given in the raw
    user order; channel sampling re-sorts users into SIC order and carries the
    permutation along so per-user values can follow their users.
    """

    K: int = 2
    L: int = 16
    d_IB: float = 75.0
    d_UI: tuple[float, ...] = (10.0, 20.0)
    d_UB: tuple[float, ...] = (30.0, 50.0)
    alpha_BU: float = 5.5
    alpha_IU: float = 2.2
    alpha_BI: float = 2.2
    eta0: float = 1e-3
    K_IB: float = 2.2
    K_UI: float = 2.2
    sigma2: float = field(default_factory=lambda: dbm_to_watts(-114.0))
    R_min: tuple[float, ...] = (0.2, 0.2)
    P_max: float = 1.0
    seed: int = 0
    los_angles: tuple[float, ...] | None = None

    def __post_init__(self):
        for name in ("d_UI", "d_UB", "R_min"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        if self.los_angles is not None:
            object.__setattr__(self, "los_angles", tuple(float(x) for x in self.los_angles))
        self.validate()

    def validate(self) -> None:
        if self.K < 1 or self.L < 1:
            raise ValueError("K and L must be at least 1")
        for name in ("d_UI", "d_UB", "R_min"):
            if len(getattr(self, name)) != self.K:
                raise ValueError(f"{name} must have K={self.K} entries")
        if self.d_IB <= 0 or min(self.d_UI) <= 0 or min(self.d_UB) <= 0:
            raise ValueError("all distances must be positive")
        if self.eta0 <= 0:
            raise ValueError("eta0 must be positive")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if min(self.R_min) < 0:
            raise ValueError("rate targets must be nonnegative")
        if self.K_IB < 0 or self.K_UI < 0:
            raise ValueError("Rician factors must be nonnegative")
        if self.P_max <= 0:
            raise ValueError("P_max must be positive")
        if self.los_angles is not None and len(self.los_angles) != self.K + 1:
            raise ValueError("los_angles needs one angle for g and one per user")

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def resolved_los_angles(self) -> np.ndarray:
        """Angles ``[phi_g, phi_h1, ..., phi_hK]`` of the LoS steering vectors."""
        if self.los_angles is not None:
            return np.asarray(self.los_angles, dtype=float)
        rng = np.random.default_rng([self.seed, _TAG_ANGLES])
        return rng.uniform(-np.pi / 2, np.pi / 2, size=self.K + 1)

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in fields(self):
            val = getattr(self, f.name)
            out[f.name] = list(val) if isinstance(val, tuple) else val
        return out


# "-114 dBm", "3 dB", "1e-3", "75 m", "0.5 W"
_QUANTITY = re.compile(r"^\s*([-+0-9.eE]+|inf)\s*(dBm|dB|W|m)?\s*$")


def parse_quantity(value: Any) -> float:
    """Convert a number or a unit-suffixed string to a linear SI value."""
    if isinstance(value, (int, float)):
        return float(value)
    match = _QUANTITY.match(str(value))
    if match is None:
        raise ValueError(f"cannot parse quantity {value!r}")
    number, unit = float(match.group(1)), match.group(2)
    if unit == "dBm":
        return dbm_to_watts(number)
    if unit == "dB":
        return db_to_linear(number)
    return number


_SCALAR_KEYS = {"d_IB", "alpha_BU", "alpha_IU", "alpha_BI", "eta0", "K_IB", "K_UI",
                "sigma2", "P_max"}
_VECTOR_KEYS = {"d_UI", "d_UB", "R_min", "los_angles"}


def config_from_mapping(data: Mapping[str, Any], base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Build a config from a scenario-file mapping, converting unit suffixes."""
    values: dict[str, Any] = {}
    for key, raw in data.items():
        if key in ("K", "L", "seed"):
            values[key] = int(raw)
        elif key in _SCALAR_KEYS:
            values[key] = parse_quantity(raw)
        elif key in _VECTOR_KEYS:
            if raw is None:
                values[key] = None
            else:
                values[key] = tuple(parse_quantity(x) for x in raw)
        else:
            raise KeyError(f"unknown scenario key {key!r}")
    if "K" not in values and "R_min" in values:
        values["K"] = len(values["R_min"])
    if base is None:
        return ScenarioConfig(**values)
    return replace(base, **values)


@dataclass(frozen=True)
class ChannelRealization:
    """One channel draw with users stored in SIC (descending order-key) order.

    ``order[k]`` is the raw user index of the k-th SIC user.
    """

    g: np.ndarray
    h: np.ndarray
    v: np.ndarray
    order: np.ndarray

    def __post_init__(self):
        for arr in (self.g, self.h, self.v, self.order):
            arr.setflags(write=False)

    @property
    def K(self) -> int:
        return self.h.shape[0]

    @property
    def L(self) -> int:
        return self.g.shape[0]

    @property
    def cascade(self) -> np.ndarray:
        """``d_k = h_k * g`` stacked as a (K, L) array."""
        return self.h * self.g[None, :]

    @property
    def order_key(self) -> np.ndarray:
        return order_keys(self.g, self.h, self.v)

    def user_values(self, values: Sequence[float]) -> np.ndarray:
        """Permute per-user values from raw order into SIC order."""
        return np.asarray(values, dtype=float)[self.order]

    def scaled(self, factor: float) -> "ChannelRealization":
        """Scale user-side channels so that all gains scale by ``factor**2``."""
        return ChannelRealization(self.g.copy(), self.h * factor, self.v * factor,
                                  self.order.copy())

    def normalized(self, sigma2: float) -> "ChannelRealization":
        """Channels whose gains are expressed in units of the noise power."""
        return self.scaled(1.0 / math.sqrt(sigma2))


def order_keys(g: np.ndarray, h: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.abs(h) @ np.abs(g) + np.abs(v)


def order_users(g: np.ndarray, h: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Permutation sorting users by descending maximum achievable amplitude.

    Ties keep ascending raw index.
    """
    keys = order_keys(np.asarray(g), np.atleast_2d(h), np.atleast_1d(v))
    return np.argsort(-keys, kind="stable")


def make_realization(g, h, v) -> ChannelRealization:
    """Sort raw channels into SIC order."""
    g = np.asarray(g, dtype=complex)
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    v = np.atleast_1d(np.asarray(v, dtype=complex))
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(h)) and np.all(np.isfinite(v))):
        raise ValueError("channels must be finite")
    perm = order_users(g, h, v)
    return ChannelRealization(g.copy(), h[perm].copy(), v[perm].copy(), perm)


def steering_vector(L: int, phi: float) -> np.ndarray:
    return np.exp(1j * np.pi * np.arange(L) * np.sin(phi))


def _crandn(rng: np.random.Generator, size) -> np.ndarray:
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / math.sqrt(2.0)


def _rician_weights(pl: float, kf: float) -> tuple[float, float]:
    if math.isinf(kf):
        return math.sqrt(pl), 0.0
    return math.sqrt(pl * kf / (kf + 1.0)), math.sqrt(pl / (kf + 1.0))


def trial_rng(seed: int, trial_index: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng([seed, _TAG_TRIAL, trial_index, *tags])


def sample_raw_channels(cfg: ScenarioConfig, trial_index: int):
    """Draw ``(g, h, v)`` in raw user order."""
    rng = trial_rng(cfg.seed, trial_index)
    angles = cfg.resolved_los_angles()
    L, K = cfg.L, cfg.K

    los_w, nlos_w = _rician_weights(path_loss(cfg.d_IB, cfg.alpha_BI, cfg.eta0), cfg.K_IB)
    g = los_w * steering_vector(L, angles[0]) + nlos_w * _crandn(rng, L)

    h = np.empty((K, L), dtype=complex)
    v = np.empty(K, dtype=complex)
    for k in range(K):
        los_w, nlos_w = _rician_weights(path_loss(cfg.d_UI[k], cfg.alpha_IU, cfg.eta0), cfg.K_UI)
        h[k] = los_w * steering_vector(L, angles[k + 1]) + nlos_w * _crandn(rng, L)
    for k in range(K):
        v[k] = math.sqrt(path_loss(cfg.d_UB[k], cfg.alpha_BU, cfg.eta0)) * _crandn(rng, 1)[0]
    return g, h, v


def sample_channels(cfg: ScenarioConfig, trial_index: int) -> ChannelRealization:
    """Deterministic channel draw for ``(cfg.seed, trial_index)``, SIC-ordered."""
    return make_realization(*sample_raw_channels(cfg, trial_index))


def effective_gains(ch: ChannelRealization, w: np.ndarray) -> np.ndarray:
    """``|g^T diag(w) h_k + v_k|^2`` for every user."""
    return np.abs(ch.cascade @ w + ch.v) ** 2


def effective_gain(ch: ChannelRealization, w: np.ndarray, k: int) -> float:
    return float(np.abs(np.dot(ch.g * w, ch.h[k]) + ch.v[k]) ** 2)


def aligned_phases(ch: ChannelRealization, k: int) -> np.ndarray:
    """IRS phases that co-phase every cascaded path of user ``k`` with its direct link."""
    theta = np.angle(ch.v[k]) - np.angle(ch.g) - np.angle(ch.h[k])
    return np.exp(1j * theta)


def random_phases(L: int, rng: np.random.Generator) -> np.ndarray:
    return np.exp(1j * rng.uniform(0.0, 2 * np.pi, size=L))
