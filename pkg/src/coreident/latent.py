"""Distributions of the latent shocks: products of uniform or normal marginals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Literal, Mapping, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import special

DRAW_CHUNK = 1 << 16
_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class Marginal:
    """Uniform on ``[a, b]`` or normal with mean ``a`` and sd ``b``."""

    kind: Literal["uniform", "normal"]
    a: float
    b: float

    def __post_init__(self) -> None:
        if self.kind == "uniform" and not self.a < self.b:
            raise ValueError(f"uniform marginal needs a < b, got [{self.a}, {self.b}]")
        if self.kind == "normal" and not self.b > 0:
            raise ValueError(f"normal marginal needs sd > 0, got {self.b}")
        if self.kind not in ("uniform", "normal"):
            raise ValueError(f"unknown marginal kind {self.kind!r}")

    @property
    def support(self) -> tuple[float, float]:
        return (self.a, self.b) if self.kind == "uniform" else (-math.inf, math.inf)

    def cdf(self, x: Any) -> Any:
        x = np.asarray(x, dtype=float)
        if self.kind == "uniform":
            return np.clip((x - self.a) / (self.b - self.a), 0.0, 1.0)
        return special.ndtr((x - self.a) / self.b)

    def prob(self, lo: Any, hi: Any) -> Any:
        """``P(lo < e < hi)``, zero when ``hi <= lo``."""
        return np.maximum(self.cdf(hi) - self.cdf(lo), 0.0)

    def partial_mean(self, lo: Any, hi: Any) -> Any:
        """``E[e; lo < e < hi]``."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if self.kind == "uniform":
            l = np.clip(lo, self.a, self.b)
            h = np.clip(hi, self.a, self.b)
            h = np.maximum(h, l)
            return (h * h - l * l) / (2.0 * (self.b - self.a))
        zl = (lo - self.a) / self.b
        zh = np.maximum((hi - self.a) / self.b, zl)
        phi = lambda z: np.exp(-0.5 * z * z) / _SQRT2PI  # noqa: E731
        return self.a * (special.ndtr(zh) - special.ndtr(zl)) + self.b * (phi(zl) - phi(zh))

    def pdf(self, x: Any) -> Any:
        x = np.asarray(x, dtype=float)
        if self.kind == "uniform":
            return np.where((x >= self.a) & (x <= self.b), 1.0 / (self.b - self.a), 0.0)
        z = (x - self.a) / self.b
        return np.exp(-0.5 * z * z) / (_SQRT2PI * self.b)

    def from_uniform(self, u: NDArray[np.float64]) -> NDArray[np.float64]:
        if self.kind == "uniform":
            return self.a + (self.b - self.a) * u
        return self.a + self.b * special.ndtri(u)

    def to_json(self) -> dict[str, Any]:
        if self.kind == "uniform":
            return {"kind": "uniform", "low": self.a, "high": self.b}
        return {"kind": "normal", "mean": self.a, "sd": self.b}

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> Marginal:
        if obj["kind"] == "uniform":
            return cls("uniform", float(obj["low"]), float(obj["high"]))
        return cls("normal", float(obj.get("mean", 0.0)), float(obj.get("sd", 1.0)))


@dataclass(frozen=True)
class LatentDistribution:
    """Product distribution of independent marginals.

    ``kind`` records how it was specified: ``uniform-box``, ``iid-normal`` or
    ``product-of-1d``. Sampling is keyed by ``(seed, draw index)`` so any
    slice of draws can be regenerated independently.
    """

    kind: str
    marginals: tuple[Marginal, ...]

    def __post_init__(self) -> None:
        if self.kind not in ("uniform-box", "iid-normal", "product-of-1d"):
            raise ValueError(f"unknown latent distribution kind {self.kind!r}")
        if not self.marginals:
            raise ValueError("at least one coordinate is required")

    @classmethod
    def uniform_box(cls, bounds: Sequence[tuple[float, float]]) -> LatentDistribution:
        return cls("uniform-box", tuple(Marginal("uniform", float(a), float(b)) for a, b in bounds))

    @classmethod
    def iid_normal(cls, dim: int, mean: float = 0.0, sd: float = 1.0) -> LatentDistribution:
        return cls("iid-normal", tuple(Marginal("normal", float(mean), float(sd)) for _ in range(dim)))

    @classmethod
    def product(cls, marginals: Sequence[Marginal]) -> LatentDistribution:
        return cls("product-of-1d", tuple(marginals))

    @property
    def dim(self) -> int:
        return len(self.marginals)

    def rect_prob(self, lows: Sequence[float], highs: Sequence[float]) -> float:
        out = 1.0
        for m, lo, hi in zip(self.marginals, lows, highs):
            out *= float(m.prob(lo, hi))
        return out

    def sample(self, n: int, seed: int, start: int = 0) -> NDArray[np.float64]:
        """Draws ``start .. start+n-1`` of the stream keyed by ``seed``."""
        if n < 0 or start < 0:
            raise ValueError("n and start must be nonnegative")
        u = _uniform_stream(n, self.dim, seed, start)
        out = np.empty_like(u)
        for k, m in enumerate(self.marginals):
            out[:, k] = m.from_uniform(u[:, k])
        return out

    def to_json(self) -> dict[str, Any]:
        if self.kind == "uniform-box":
            return {"kind": "uniform-box", "bounds": [[m.a, m.b] for m in self.marginals]}
        if self.kind == "iid-normal":
            m = self.marginals[0]
            return {"kind": "iid-normal", "dim": self.dim, "mean": m.a, "sd": m.b}
        return {"kind": "product-of-1d", "marginals": [m.to_json() for m in self.marginals]}

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> LatentDistribution:
        kind = obj.get("kind")
        if kind == "uniform-box":
            return cls.uniform_box([tuple(b) for b in obj["bounds"]])
        if kind == "iid-normal":
            return cls.iid_normal(int(obj["dim"]), float(obj.get("mean", 0.0)), float(obj.get("sd", 1.0)))
        if kind == "product-of-1d":
            return cls.product([Marginal.from_json(m) for m in obj["marginals"]])
        raise ValueError(f"unknown latent distribution kind {kind!r}")


def _uniform_stream(n: int, dim: int, seed: int, start: int) -> NDArray[np.float64]:
    """Uniforms in (0, 1); chunk ``c`` of the stream uses Philox keyed by seed at counter ``c``."""
    if n == 0:
        return np.empty((0, dim))
    first, last = start // DRAW_CHUNK, (start + n - 1) // DRAW_CHUNK
    parts = []
    for c in range(first, last + 1):
        gen = np.random.Generator(np.random.Philox(key=seed % (1 << 64), counter=c << 128))
        block = gen.random((DRAW_CHUNK, dim))
        lo = max(start - c * DRAW_CHUNK, 0)
        hi = min(start + n - c * DRAW_CHUNK, DRAW_CHUNK)
        parts.append(block[lo:hi])
    u = np.concatenate(parts)
    # keep strictly inside (0, 1) for the normal quantile
    return np.clip(u, 1e-300, np.nextafter(1.0, 0.0))
