"""In-parameter-linear neural architectures.

Every model here has the form ``y_hat = w . g(x)``: a feature map ``g`` that
never sees the weights, followed by a linear read-out. Three feature maps are
provided:

* :class:`PolynomialMap` - higher-order neural unit (HONU) monomials,
* :class:`FunctionalLinkMap` - random vector functional link (RVFL / ELM) hidden layer,
* :class:`CustomBasisMap` - user supplied scalar basis functions.

Feature maps are frozen after construction and hold no reference to any
weight vector, so weight independence holds by construction.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from . import _specs
from .errors import ConfigError, DomainError
from .linalg import Vec, as_vec


def _logistic(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


ACTIVATIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "tanh": np.tanh,
    "logistic": _logistic,
}


def _check_input(x, input_dim: int) -> Vec:
    x = as_vec(x, "input")
    if x.size != input_dim:
        raise DomainError(f"expected input of dimension {input_dim}, got {x.size}")
    return x


@dataclass(frozen=True)
class PolynomialMap:
    """All monomials of the inputs up to ``order``.

    Monomials are in graded lexicographic order: degree ascending, then
    lexicographic in the variable indices, so for ``order=2, input_dim=2`` the
    features are ``[1, a, b, a*a, a*b, b*b]``. The constant term is index 0
    when ``include_bias`` is set.
    """

    order: int
    input_dim: int
    include_bias: bool = True
    terms: tuple[tuple[int, ...], ...] = field(init=False, repr=False)

    def __post_init__(self):
        if self.order < 1 or self.input_dim < 1:
            raise ConfigError("polynomial map needs order >= 1 and input_dim >= 1")
        first = 0 if self.include_bias else 1
        terms = tuple(
            combo
            for degree in range(first, self.order + 1)
            for combo in itertools.combinations_with_replacement(range(self.input_dim), degree)
        )
        object.__setattr__(self, "terms", terms)

    @property
    def output_dim(self) -> int:
        return len(self.terms)

    def __call__(self, x) -> Vec:
        x = _check_input(x, self.input_dim)
        return np.array([math.prod(x[i] for i in term) for term in self.terms])


@dataclass(frozen=True)
class FunctionalLinkMap:
    """Fixed random hidden layer: ``[1, x (if direct_links), act(W x + b)]``.

    ``W`` (hidden_dim x input_dim) and then ``b`` (hidden_dim) are drawn
    uniform on [-1, 1] from numpy's PCG64 generator seeded with ``seed``.
    """

    input_dim: int
    hidden_dim: int
    activation: str = "tanh"
    direct_links: bool = True
    seed: int = 0
    projection: np.ndarray = field(init=False, repr=False, compare=False)
    biases: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.input_dim < 1 or self.hidden_dim < 1:
            raise ConfigError("functional-link map needs input_dim >= 1 and hidden_dim >= 1")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}; choose from {sorted(ACTIVATIONS)}")
        rng = np.random.Generator(np.random.PCG64(self.seed))
        projection = rng.uniform(-1.0, 1.0, size=(self.hidden_dim, self.input_dim))
        biases = rng.uniform(-1.0, 1.0, size=self.hidden_dim)
        projection.flags.writeable = False
        biases.flags.writeable = False
        object.__setattr__(self, "projection", projection)
        object.__setattr__(self, "biases", biases)

    @property
    def output_dim(self) -> int:
        return 1 + self.hidden_dim + (self.input_dim if self.direct_links else 0)

    def __call__(self, x) -> Vec:
        x = _check_input(x, self.input_dim)
        hidden = ACTIVATIONS[self.activation](self.projection @ x + self.biases)
        parts = [np.ones(1), x, hidden] if self.direct_links else [np.ones(1), hidden]
        return np.concatenate(parts)


@dataclass(frozen=True)
class CustomBasisMap:
    """Named scalar basis functions, each a total function of the whole input."""

    input_dim: int
    basis: tuple[tuple[str, Callable[[np.ndarray], float]], ...]

    def __post_init__(self):
        if self.input_dim < 1 or not self.basis:
            raise ConfigError("custom basis needs input_dim >= 1 and at least one function")
        object.__setattr__(self, "basis", tuple(self.basis))

    @property
    def output_dim(self) -> int:
        return len(self.basis)

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.basis]

    def __call__(self, x) -> Vec:
        x = _check_input(x, self.input_dim)
        x.flags.writeable = False
        out = np.array([float(fn(x)) for _, fn in self.basis])
        if not np.all(np.isfinite(out)):
            raise DomainError("custom basis produced a non-finite feature")
        return out


FeatureMap = Union[PolynomialMap, FunctionalLinkMap, CustomBasisMap]


def features(fmap: FeatureMap, x) -> Vec:
    """Evaluate the feature vector ``g(x)``."""
    return fmap(x)


@dataclass
class IplnaModel:
    """Weights plus a feature map; ``predict`` is ``w . g(x)``."""

    w: np.ndarray
    fmap: FeatureMap

    def __post_init__(self):
        self.w = as_vec(self.w, "weights")
        if self.w.size != self.fmap.output_dim:
            raise DomainError(f"weights have length {self.w.size}, feature map gives {self.fmap.output_dim}")

    def predict(self, x) -> float:
        return float(self.w @ self.fmap(x))


def predict(model: IplnaModel, x) -> float:
    return model.predict(x)


def parse_arch(text: str) -> FeatureMap:
    """Build a feature map from ``honu:...`` or ``rvfl:...`` spec strings.

    >>> parse_arch("honu:order=2,dim=2").output_dim
    6
    """
    kind, p = _specs.split_spec(text)
    if kind == "honu":
        _specs.check_keys(text, p, {"order", "dim"}, {"bias"})
        return PolynomialMap(
            order=_specs.to_int(text, "order", p["order"], 1),
            input_dim=_specs.to_int(text, "dim", p["dim"], 1),
            include_bias=_specs.to_flag(text, "bias", p.get("bias", "1")),
        )
    if kind == "rvfl":
        _specs.check_keys(text, p, {"dim", "hidden", "act", "seed"}, {"direct"})
        if p["act"] not in ACTIVATIONS:
            raise ConfigError(f"act must be one of {sorted(ACTIVATIONS)} in spec {text!r}")
        seed = _specs.to_int(text, "seed", p["seed"], 0)
        if seed >= 2**64:
            raise ConfigError(f"seed must fit in 64 bits in spec {text!r}")
        return FunctionalLinkMap(
            input_dim=_specs.to_int(text, "dim", p["dim"], 1),
            hidden_dim=_specs.to_int(text, "hidden", p["hidden"], 1),
            activation=p["act"],
            direct_links=_specs.to_flag(text, "direct", p.get("direct", "1")),
            seed=seed,
        )
    raise ConfigError(f"unknown architecture kind {kind!r}; expected honu or rvfl")

