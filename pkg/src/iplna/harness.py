"""Data sources and the learn-monitor-log experiment loop.

Synthetic data spec strings (``synth:`` prefix on the command line)::

    linear:[w=<f;f;...>][,noise=<f>][,a=<f>]
    poly:order=<r>,(w=<f;f;...>|dim=<n>)[,noise=<f>][,a=<f>]
    probe:dir=<f;f;...>[,target=<f>][,mu=<f>][,y=<f>]

``linear`` draws ``y = w . g(x)`` with ``g`` the experiment's own feature map,
so targets are exactly realisable. ``poly`` uses a polynomial map of the given
order with bias (realisable by a HONU of that order). Missing true weights are
drawn uniform on [-1, 1] from the seed. Inputs are uniform on ``[-a, a]``
(default ``a = 1``). ``probe`` repeats one input ``t * dir`` with ``t`` chosen
so that ``mu * ||g||^2`` equals ``target``; under fixed-rate GD with that
``mu`` the local matrix has spectral radius ``|1 - target|``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from . import _specs
from .architectures import FeatureMap, PolynomialMap, parse_arch
from .errors import ConfigError, DataError, DivergenceError
from .learners import AdamState, adam_extended_state, learner_step, parse_learner
from .monitor import Monitor, MonitorConfig

Sample = tuple[np.ndarray, float]

EXIT_CLEAN, EXIT_USAGE, EXIT_ALARMED, EXIT_DIVERGED = 0, 1, 2, 3


def ingest_csv(path) -> Iterator[Sample]:
    """Yield ``(x, y)`` rows from a CSV with header ``x1,...,xn,y``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return
        header = [h.strip() for h in header]
        n = len(header) - 1
        if n < 1 or header[-1] != "y" or header[:-1] != [f"x{i}" for i in range(1, n + 1)]:
            raise DataError(f"header must be x1,...,xn,y; got {','.join(header)}", line=1)
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != n + 1:
                raise DataError(f"expected {n + 1} columns, got {len(row)}", line=line)
            try:
                values = [float(c) for c in row]
            except ValueError as exc:
                raise DataError(f"non-numeric value ({exc})", line=line) from None
            if not all(math.isfinite(v) for v in values):
                raise DataError("non-finite value", line=line)
            yield np.array(values[:-1]), values[-1]


def write_csv(path, samples) -> int:
    count = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for x, y in samples:
            if count == 0:
                writer.writerow([f"x{i}" for i in range(1, len(x) + 1)] + ["y"])
            writer.writerow([repr(float(v)) for v in x] + [repr(float(y))])
            count += 1
    return count


@dataclass(frozen=True)
class SyntheticSpec:
    kind: str
    true_w: Optional[tuple[float, ...]] = None
    noise_std: float = 0.0
    a: float = 1.0
    order: Optional[int] = None
    dim: Optional[int] = None
    direction: Optional[tuple[float, ...]] = None
    eta_gnorm2_target: float = 2.5
    mu: float = 1.0
    y: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "poly", "probe"):
            raise ConfigError(f"unknown synthetic kind {self.kind!r}")
        if not self.noise_std >= 0 or not self.a > 0:
            raise ConfigError("need noise >= 0 and a > 0")
        if self.kind == "probe" and not self.direction:
            raise ConfigError("probe needs a direction")
        if self.kind == "poly" and self.order is None:
            raise ConfigError("poly needs an order")


def parse_synth(text: str) -> SyntheticSpec:
    kind, p = _specs.split_spec(text)
    num = lambda key, default: _specs.to_float(text, key, p[key]) if key in p else default  # noqa: E731
    w = tuple(_specs.to_floats(text, "w", p["w"])) if "w" in p else None
    if kind == "linear":
        _specs.check_keys(text, p, set(), {"w", "noise", "a"})
        return SyntheticSpec("linear", true_w=w, noise_std=num("noise", 0.0), a=num("a", 1.0))
    if kind == "poly":
        _specs.check_keys(text, p, {"order"}, {"w", "dim", "noise", "a"})
        dim = _specs.to_int(text, "dim", p["dim"], 1) if "dim" in p else None
        if w is None and dim is None:
            raise ConfigError(f"poly spec {text!r} needs w or dim")
        return SyntheticSpec(
            "poly",
            true_w=w,
            order=_specs.to_int(text, "order", p["order"], 1),
            dim=dim,
            noise_std=num("noise", 0.0),
            a=num("a", 1.0),
        )
    if kind == "probe":
        _specs.check_keys(text, p, {"dir"}, {"target", "mu", "y"})
        return SyntheticSpec(
            "probe",
            direction=tuple(_specs.to_floats(text, "dir", p["dir"])),
            eta_gnorm2_target=num("target", 2.5),
            mu=num("mu", 1.0),
            y=num("y", 1.0),
        )
    raise ConfigError(f"unknown synthetic kind {kind!r}; expected linear, poly or probe")


def _poly_dim_from_weights(order: int, n_weights: int) -> int:
    n = 1
    while math.comb(n + order, order) < n_weights:
        n += 1
    if math.comb(n + order, order) != n_weights:
        raise ConfigError(f"{n_weights} weights is not a full polynomial of order {order}")
    return n


def _probe_input(fmap: FeatureMap, direction: np.ndarray, target: float) -> np.ndarray:
    """Scale ``direction`` so that ``||g(t * direction)||^2 == target`` by bisection."""
    sq = lambda t: float(np.sum(fmap(t * direction) ** 2))  # noqa: E731
    lo, hi = 0.0, 1.0
    if sq(lo) > target:
        raise ConfigError(f"probe target {target} is below ||g(0)||^2 = {sq(lo)}")
    while sq(hi) < target:
        lo, hi = hi, 2.0 * hi
        if hi > 1e8:
            raise ConfigError(f"probe target {target} is not reachable by this feature map")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if sq(mid) < target:
            lo = mid
        else:
            hi = mid
    return hi * direction


def generate(spec: SyntheticSpec, seed: int, steps: int, fmap: Optional[FeatureMap] = None) -> Iterator[Sample]:
    """Reproducible stream of ``steps`` samples.

    ``linear`` and ``probe`` need the experiment's feature map ``fmap``.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    if spec.kind == "probe":
        if fmap is None:
            raise ConfigError("probe data needs a feature map")
        direction = np.array(spec.direction, dtype=float)
        if direction.size != fmap.input_dim:
            raise ConfigError(f"probe direction has {direction.size} entries, input dimension is {fmap.input_dim}")
        x = _probe_input(fmap, direction, spec.eta_gnorm2_target / spec.mu)
        for _ in range(steps):
            yield x.copy(), spec.y
        return

    if spec.kind == "linear":
        if fmap is None:
            raise ConfigError("linear plant needs a feature map")
        plant = fmap
    else:
        dim = spec.dim if spec.dim is not None else _poly_dim_from_weights(spec.order, len(spec.true_w))
        plant = PolynomialMap(order=spec.order, input_dim=dim)
    if spec.true_w is None:
        true_w = rng.uniform(-1.0, 1.0, plant.output_dim)
    else:
        true_w = np.array(spec.true_w, dtype=float)
        if true_w.size != plant.output_dim:
            raise ConfigError(f"plant has {plant.output_dim} features but {true_w.size} weights were given")
    for _ in range(steps):
        x = rng.uniform(-spec.a, spec.a, plant.input_dim)
        y = float(true_w @ plant(x))
        if spec.noise_std > 0:
            y += spec.noise_std * rng.standard_normal()
        yield x, y


def plant_weights(spec: SyntheticSpec, seed: int, fmap: Optional[FeatureMap] = None) -> np.ndarray:
    """True weights used by :func:`generate` for ``linear``/``poly`` specs."""
    if spec.true_w is not None:
        return np.array(spec.true_w, dtype=float)
    if spec.kind == "linear":
        n = fmap.output_dim
    elif spec.kind == "poly":
        n = PolynomialMap(order=spec.order, input_dim=spec.dim).output_dim
    else:
        raise ConfigError("probe data has no plant weights")
    return np.random.Generator(np.random.PCG64(seed)).uniform(-1.0, 1.0, n)


@dataclass
class ExperimentConfig:
    arch_spec: str
    learner_spec: str
    data_source: str
    steps: int
    seed: int = 0
    output_path: Optional[str] = None
    monitor: MonitorConfig = field(default_factory=MonitorConfig)
    init: str = "zeros"

    def validate(self) -> None:
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.init not in ("zeros", "uniform"):
            raise ConfigError("init must be zeros or uniform")
        fmap = parse_arch(self.arch_spec)
        parse_learner(self.learner_spec, fmap.output_dim)
        if self.data_source.startswith("synth:"):
            parse_synth(self.data_source[len("synth:"):])


@dataclass
class RunSummary:
    status: str
    steps_run: int
    final_w: np.ndarray
    final_w_norm: float
    final_error_rms: Optional[float]
    alarms_count: int
    first_alarm_k: Optional[int]
    bibs_bound_final: Optional[float]
    reports: list = field(default_factory=list, repr=False)

    @property
    def exit_code(self) -> int:
        return {"clean": EXIT_CLEAN, "alarmed": EXIT_ALARMED, "diverged": EXIT_DIVERGED}[self.status]

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "steps_run": self.steps_run,
            "final_w_norm": self.final_w_norm,
            "final_error_rms": self.final_error_rms,
            "alarms_count": self.alarms_count,
            "first_alarm_k": self.first_alarm_k,
            "bibs_bound_final": self.bibs_bound_final,
        }


def _json_float(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def dump_record(record: dict) -> str:
    """One compact JSON line; non-finite floats are written as null."""
    clean = {
        key: (_json_float(val) if isinstance(val, (float, np.floating)) else val) for key, val in record.items()
    }
    return json.dumps(clean, separators=(",", ":"), allow_nan=False)


def open_source(cfg: ExperimentConfig, fmap: FeatureMap) -> Iterator[Sample]:
    if cfg.data_source.startswith("synth:"):
        return generate(parse_synth(cfg.data_source[len("synth:"):]), cfg.seed, cfg.steps, fmap)
    if not Path(cfg.data_source).is_file():
        raise ConfigError(f"data file {cfg.data_source!r} not found")
    return ingest_csv(cfg.data_source)


def run_experiment(cfg: ExperimentConfig, keep_reports: bool = False) -> RunSummary:
    """Run the learn-monitor loop and write one JSON line per step.

    Per sample: features, error, learner step, monitor, log. The run stops
    early on a divergence (non-finite update or ``||w||`` above the monitor's
    cap) or when a CSV source runs out of rows.
    """
    cfg.validate()
    fmap = parse_arch(cfg.arch_spec)
    n = fmap.output_dim
    state = parse_learner(cfg.learner_spec, n)
    if cfg.init == "uniform":
        w = np.random.Generator(np.random.PCG64(cfg.seed)).uniform(-0.1, 0.1, n)
    else:
        w = np.zeros(n)

    extended = isinstance(state, AdamState)
    state_norm = lambda w, s: float(np.linalg.norm(adam_extended_state(w, s) if extended else w))  # noqa: E731
    monitor = Monitor(cfg.monitor, w0_norm=state_norm(w, state))

    errors: list[float] = []
    reports = []
    alarms, first_alarm, last_report, status = 0, None, None, "clean"
    out = open(cfg.output_path, "w") if cfg.output_path else None
    try:
        for k, (x, y) in enumerate(open_source(cfg, fmap)):
            if k >= cfg.steps:
                break
            if x.size != fmap.input_dim:
                raise DataError(f"sample {k} has {x.size} inputs, architecture expects {fmap.input_dim}")
            g = fmap(x)
            try:
                res = learner_step(w, g, y, state, k)
            except DivergenceError:
                e = float(y - w @ g)
                report = monitor.signal_divergence(k)
                w_norm = float(np.linalg.norm(w))
            else:
                w, state = res.w, res.state
                e = res.sample.e
                w_norm = float(np.linalg.norm(w))
                report = monitor.observe(res.ss, state_norm(w, state), k)
            errors.append(e)
            if keep_reports:
                reports.append(report)
            last_report = report
            if out is not None:
                out.write(dump_record(report.to_record(e, w_norm)) + "\n")
                out.flush()
            if report.alarm:
                alarms += 1
                if first_alarm is None:
                    first_alarm = k
                status = "alarmed"
            if report.alarm_reason == "divergence":
                status = "diverged"
                break
    finally:
        if out is not None:
            out.close()

    tail = errors[len(errors) - max(1, math.ceil(0.1 * len(errors))):] if errors else []
    rms = math.sqrt(sum(e * e for e in tail) / len(tail)) if tail else None
    return RunSummary(
        status=status,
        steps_run=len(errors),
        final_w=w,
        final_w_norm=float(np.linalg.norm(w)),
        final_error_rms=_json_float(rms),
        alarms_count=alarms,
        first_alarm_k=first_alarm,
        bibs_bound_final=None if last_report is None else last_report.bibs_bound,
        reports=reports,
    )
