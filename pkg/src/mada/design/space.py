"""Design space boxes and study configuration."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

DIRECTIONS = ("minimize", "maximize")
POLICIES = ("scripted", "trust_region", "external")
BACKENDS = ("surrogate", "simulation")


@dataclass(frozen=True)
class DesignSpace:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    names: tuple[str, ...] = ()

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        names = tuple(self.names) if self.names else tuple(f"p{i + 1}" for i in range(len(lower)))
        object.__setattr__(self, "names", names)
        if not lower:
            raise ValueError("design space needs at least one dimension")
        if len(lower) != len(upper) or len(names) != len(lower):
            raise ValueError("lower, upper and names must have equal length")
        for lo, hi in zip(lower, upper):
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValueError("bounds must be finite")
            if not lo < hi:
                raise ValueError(f"lower bound {lo} must be below upper bound {hi}")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def span(self) -> tuple[float, ...]:
        return tuple(hi - lo for lo, hi in zip(self.lower, self.upper))

    def clip(self, x) -> list[float]:
        return [min(max(float(v), lo), hi) for v, lo, hi in zip(x, self.lower, self.upper)]

    def contains(self, x) -> bool:
        return len(x) == self.dim and all(
            lo <= v <= hi for v, lo, hi in zip(x, self.lower, self.upper)
        )

    def center(self) -> list[float]:
        return [(lo + hi) / 2.0 for lo, hi in zip(self.lower, self.upper)]

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "lower": list(self.lower),
            "upper": list(self.upper),
            "names": list(self.names),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "DesignSpace":
        space = cls(
            lower=tuple(obj["lower"]),
            upper=tuple(obj["upper"]),
            names=tuple(obj.get("names", ())),
        )
        if "dim" in obj and int(obj["dim"]) != space.dim:
            raise ValueError(f"dim {obj['dim']} does not match bounds of length {space.dim}")
        return space


@dataclass
class StudyConfig:
    space: DesignSpace
    direction: str = "minimize"
    backend: dict = field(default_factory=lambda: {"kind": "surrogate"})
    rounds: int = 3
    samples_per_round: int = 10
    seed: int = 0
    policy: str = "scripted"
    trust_region_shrink: float = 0.5
    approval_required: bool = False
    # Command line of the external proposal process; only used when
    # policy == "external".
    policy_command: tuple[str, ...] = ()

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        kind = self.backend.get("kind")
        if kind not in BACKENDS:
            raise ValueError(f"backend.kind must be one of {BACKENDS}, got {kind!r}")
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        if self.samples_per_round < 1:
            raise ValueError("samples_per_round must be at least 1")
        if not 0.0 < self.trust_region_shrink < 1.0:
            raise ValueError("trust_region_shrink must lie in (0, 1)")
        if self.policy == "external" and not self.policy_command:
            raise ValueError("external policy needs policy_command")
        self.seed = int(self.seed)

    def to_dict(self) -> dict:
        return {
            "space": self.space.to_dict(),
            "direction": self.direction,
            "backend": dict(self.backend),
            "rounds": self.rounds,
            "samples_per_round": self.samples_per_round,
            "seed": self.seed,
            "policy": self.policy,
            "trust_region_shrink": self.trust_region_shrink,
            "approval_required": self.approval_required,
            "policy_command": list(self.policy_command),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "StudyConfig":
        known = {
            "direction", "backend", "rounds", "samples_per_round", "seed",
            "policy", "trust_region_shrink", "approval_required", "policy_command",
        }
        extra = set(obj) - known - {"space"}
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        kwargs = {k: obj[k] for k in known if k in obj}
        if "policy_command" in kwargs:
            kwargs["policy_command"] = tuple(kwargs["policy_command"])
        return cls(space=DesignSpace.from_dict(obj["space"]), **kwargs)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")


def load_config(path: str | Path) -> StudyConfig:
    return StudyConfig.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def spline_space() -> DesignSpace:
    """The four-knot interface perturbation box used by the surrogate."""
    return DesignSpace(lower=(-0.25,) * 4, upper=(0.25,) * 4,
                       names=("p1", "p2", "p3", "p4"))
