"""Parsing of the ``kind:key=value,...`` spec strings used on the command line."""

from __future__ import annotations

from .errors import ConfigError


def split_spec(text: str) -> tuple[str, dict[str, str]]:
    """Split ``kind:k1=v1,k2=v2`` into ``("kind", {"k1": "v1", ...})``."""
    kind, sep, rest = text.strip().partition(":")
    if not kind:
        raise ConfigError(f"missing kind in spec {text!r}")
    params: dict[str, str] = {}
    if sep and rest:
        for item in rest.split(","):
            key, eq, value = item.partition("=")
            if not eq or not key or not value:
                raise ConfigError(f"bad parameter {item!r} in spec {text!r}")
            if key in params:
                raise ConfigError(f"duplicate parameter {key!r} in spec {text!r}")
            params[key] = value
    return kind, params


def check_keys(text: str, params: dict[str, str], required: set[str], optional: set[str] = frozenset()) -> None:
    missing = required - params.keys()
    if missing:
        raise ConfigError(f"spec {text!r} is missing {sorted(missing)}")
    unknown = params.keys() - required - optional
    if unknown:
        raise ConfigError(f"spec {text!r} has unknown parameters {sorted(unknown)}")


def to_float(text: str, key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key}={value!r} is not a number in spec {text!r}") from None


def to_int(text: str, key: str, value: str, minimum: int | None = None) -> int:
    try:
        out = int(value)
    except ValueError:
        raise ConfigError(f"{key}={value!r} is not an integer in spec {text!r}") from None
    if minimum is not None and out < minimum:
        raise ConfigError(f"{key} must be >= {minimum} in spec {text!r}")
    return out


def to_flag(text: str, key: str, value: str) -> bool:
    if value not in ("0", "1"):
        raise ConfigError(f"{key} must be 0 or 1 in spec {text!r}")
    return value == "1"


def to_floats(text: str, key: str, value: str) -> list[float]:
    """Parse a ``;``-separated list of numbers."""
    return [to_float(text, key, part) for part in value.split(";")]
