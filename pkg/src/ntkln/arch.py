"""Architecture description for fully-connected networks with Layer Norm."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .activations import Activation, activation as _activation
from .errors import ConfigError


def parse_ln_positions(spec, depth: int) -> frozenset:
    """Resolve an LN placement spec to a set of stage indices.

    Stage h means Layer Norm applied to the output of linear map h+1, i.e.
    between that linear map and the activation that follows it.  Stage 0 is
    the "linear layer followed by a Layer Norm" placement whose NTK depends
    only on the soft-cosine similarity of the inputs.

    Accepts a name ('none', 'first', 'last', 'every'), an iterable of stage
    indices, or a comma-separated string of indices.
    """
    if spec is None:
        return frozenset()
    if isinstance(spec, str):
        name = spec.strip().lower()
        if name in ("none", ""):
            return frozenset()
        if name == "first":
            return frozenset({0})
        if name == "last":
            return frozenset({depth - 1})
        if name in ("every", "all"):
            return frozenset(range(depth))
        try:
            return frozenset(int(tok) for tok in name.split(","))
        except ValueError:
            raise ConfigError(f"cannot parse LN placement {spec!r}") from None
    return frozenset(int(h) for h in spec)


@dataclass(frozen=True)
class ArchSpec:
    """Depth-L fully-connected architecture with optional LN placements.

    depth counts hidden layers; the network has depth+1 linear maps, the
    last producing the scalar output.  hidden_widths matter only for the
    finite-width network; the kernel is width-independent.  sigma_b > 0 is
    required for a non-degenerate kernel (fitting enforces this); 0 is
    accepted here so scale-free diagnostics can be run.
    """

    input_dim: int
    depth: int
    activation: Activation
    sigma_b: float = 0.1
    ln_positions: frozenset = frozenset()
    hidden_widths: tuple = field(default=())

    def __post_init__(self):
        if self.depth < 1:
            raise ConfigError(f"depth must be >= 1, got {self.depth}")
        if self.input_dim < 1:
            raise ConfigError(f"input_dim must be >= 1, got {self.input_dim}")
        if self.sigma_b < 0:
            raise ConfigError("sigma_b must be non-negative")
        pos = frozenset(int(h) for h in self.ln_positions)
        if not pos <= frozenset(range(self.depth + 1)):
            raise ConfigError(
                f"ln_positions {sorted(pos)} outside stages 0..{self.depth}")
        object.__setattr__(self, "ln_positions", pos)
        widths = tuple(int(w) for w in self.hidden_widths) or (128,) * self.depth
        if len(widths) != self.depth or any(w < 1 for w in widths):
            raise ConfigError(f"hidden_widths must list {self.depth} positive widths")
        object.__setattr__(self, "hidden_widths", widths)

    @property
    def has_ln(self) -> bool:
        return bool(self.ln_positions)

    @property
    def sigma_b2(self) -> float:
        return self.sigma_b ** 2


def make_arch(input_dim: int, depth: int, activation="relu", ln=None,
              sigma_b: float = 0.1, width: int | Iterable[int] = 128) -> ArchSpec:
    """Convenience constructor accepting names for activation and LN."""
    act = _activation(activation) if isinstance(activation, str) else activation
    widths = (width,) * depth if isinstance(width, int) else tuple(width)
    return ArchSpec(input_dim=input_dim, depth=depth, activation=act,
                    sigma_b=sigma_b, ln_positions=parse_ln_positions(ln, depth),
                    hidden_widths=widths)
