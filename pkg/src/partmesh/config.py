"""Run configuration with INI-style ``key = value`` files."""
import configparser
import dataclasses
from dataclasses import dataclass, fields

from .errors import ContractViolation

# section each key is written under
_SECTIONS = {
    "epochs": "train", "batch_size": "train", "lr": "train", "lr_decay": "train",
    "momentum": "train", "gamma_cycle": "train", "seed": "train",
    "z_dim": "model", "cheb_order": "model", "parts": "model", "filters": "model",
    "sparsity": "nmf", "nmf_restarts": "nmf", "nmf_iters": "nmf",
    "levels": "hierarchy", "factor": "hierarchy",
    "no_local_weights": "ablation", "no_projection": "ablation",
}


@dataclass(frozen=True)
class RunConfig:
    """All hyperparameters. Defaults are the full-scale published settings."""

    epochs: int = 300
    batch_size: int = 32
    lr: float = 0.0125
    lr_decay: float = 0.99
    momentum: float = 0.9
    gamma_cycle: float = 0.5
    seed: int = 0
    z_dim: int = 64
    cheb_order: int = 6
    parts: int = 4
    filters: tuple = (16, 16, 16, 32)
    sparsity: float = 7.5
    nmf_restarts: int = 5
    nmf_iters: int = 2000
    levels: int = 4
    factor: float = 4.0
    no_local_weights: bool = False
    no_projection: bool = False

    def __post_init__(self):
        object.__setattr__(self, "filters", tuple(int(f) for f in self.filters))
        for name in ("epochs", "batch_size", "z_dim", "cheb_order", "parts",
                     "nmf_restarts", "nmf_iters", "levels"):
            if getattr(self, name) < 1:
                raise ContractViolation(f"{name} must be positive")
        if not self.filters or min(self.filters) < 1:
            raise ContractViolation("filters must be positive widths")
        if self.lr <= 0 or not 0 < self.lr_decay <= 1:
            raise ContractViolation("lr must be positive and lr_decay in (0, 1]")
        if not 0 <= self.momentum < 1:
            raise ContractViolation("momentum must lie in [0, 1)")
        if self.gamma_cycle < 0 or self.sparsity < 0:
            raise ContractViolation("gamma_cycle and sparsity must be non-negative")
        if self.factor <= 1:
            raise ContractViolation("factor must exceed 1")

    @classmethod
    def desk(cls, **overrides):
        """Scaled-down settings for a ~1280-vertex template."""
        return cls(**{"z_dim": 32, "epochs": 100, **overrides})

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_text(self):
        cp = configparser.ConfigParser()
        for f in fields(self):
            section = _SECTIONS[f.name]
            if not cp.has_section(section):
                cp.add_section(section)
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ", ".join(str(v) for v in value)
            elif isinstance(value, float):
                value = repr(value)
            cp.set(section, f.name, str(value))
        lines = []
        for section in cp.sections():
            lines.append(f"[{section}]")
            lines += [f"{k} = {v}" for k, v in cp.items(section)]
            lines.append("")
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text, base=None):
        """Parse config text; keys not present keep the values of ``base``."""
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ContractViolation(f"bad config: {exc}") from None
        base = cls() if base is None else base
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for section in cp.sections():
            for key, raw in cp.items(section):
                if key not in types:
                    raise ContractViolation(f"unknown config key {key!r} in [{section}]")
                default = getattr(base, key)
                try:
                    if isinstance(default, bool):
                        values[key] = cp.getboolean(section, key)
                    elif isinstance(default, tuple):
                        values[key] = tuple(int(v) for v in raw.replace(",", " ").split())
                    else:
                        values[key] = type(default)(raw)
                except ValueError:
                    raise ContractViolation(f"bad value for {key}: {raw!r}") from None
        return base.replace(**values)

    @classmethod
    def load(cls, path, base=None):
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read(), base)
