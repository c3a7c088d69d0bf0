"""Model/scenario files and CSV reading and writing for the command line tool.

Model file (JSON)::

    {"n": 1, "A": [0.5], "B": [1.0], "C": [1.0], "sigma2": 1.0, "dt_minutes": 9.0}

``A`` is row-major with ``n*n`` entries. A one-state model may instead (or
additionally) carry ``"continuous": {"f": ..., "h": ..., "c": ...}`` which is
zero-order-hold sampled at ``dt_minutes``. Scenario keys ``k_star``, ``N``,
``x0`` and ``amplitude`` may live in the same file or in a sidecar file.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigError
from .lti import DiscreteLTISystem, StepScenario, zoh_discretize

MODEL_KEYS = {"n", "A", "B", "C", "sigma2", "dt_minutes", "continuous"}
SCENARIO_KEYS = {"k_star", "N", "x0", "amplitude"}


def _load_json(path: str | Path, what: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {what} file {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return doc


def _number(doc: dict, key: str, path, default=None) -> float:
    if key not in doc:
        if default is None:
            raise ConfigError(f"{path}: missing field '{key}'")
        return default
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{path}: field '{key}' must be a finite number, got {value!r}")
    return float(value)


def _vector(doc: dict, key: str, size: int, path) -> list[float]:
    value = doc.get(key)
    if not isinstance(value, list):
        raise ConfigError(f"{path}: field '{key}' must be an array of {size} numbers")
    if len(value) != size:
        raise ConfigError(f"{path}: field '{key}' must have {size} entries, got {len(value)}")
    for i, v in enumerate(value):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(f"{path}: field '{key}'[{i}] must be a finite number, got {v!r}")
    return [float(v) for v in value]


@dataclass(frozen=True)
class ContinuousSpec:
    """First-order continuous plant ``xdot = -f x + h u``, ``y = c x``."""

    f: float
    h: float
    c: float

    def sample(self, dt: float, sigma2: float) -> DiscreteLTISystem:
        return replace(zoh_discretize(self.f, self.h, self.c, dt), sigma2=sigma2)


def parse_model(doc: dict, path: str | Path = "<model>") -> tuple[DiscreteLTISystem, Optional[ContinuousSpec]]:
    sigma2 = _number(doc, "sigma2", path)
    if sigma2 < 0:
        raise ConfigError(f"{path}: field 'sigma2' must be >= 0, got {sigma2}")
    dt = _number(doc, "dt_minutes", path, default=1.0)
    if dt <= 0:
        raise ConfigError(f"{path}: field 'dt_minutes' must be > 0, got {dt}")
    cont = None
    if "continuous" in doc:
        c = doc["continuous"]
        if not isinstance(c, dict):
            raise ConfigError(f"{path}: field 'continuous' must be an object with f, h, c")
        where = f"{path} (continuous)"
        cont = ContinuousSpec(_number(c, "f", where), _number(c, "h", where), _number(c, "c", where))
    if "A" not in doc:
        if cont is None:
            raise ConfigError(f"{path}: missing field 'A' (and no 'continuous' block)")
        return cont.sample(dt, sigma2), cont
    n = doc.get("n")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ConfigError(f"{path}: field 'n' must be a positive integer, got {n!r}")
    A = np.array(_vector(doc, "A", n * n, path)).reshape(n, n)
    sys = DiscreteLTISystem(A, _vector(doc, "B", n, path), _vector(doc, "C", n, path), sigma2, dt)
    if cont is not None and n != 1:
        raise ConfigError(f"{path}: a 'continuous' block is only allowed for n = 1")
    return sys, cont


def model_to_dict(sys: DiscreteLTISystem) -> dict:
    return {"n": sys.n, "A": sys.A.reshape(-1).tolist(), "B": sys.B.tolist(),
            "C": sys.C.tolist(), "sigma2": sys.sigma2, "dt_minutes": sys.dt}


@dataclass
class ScenarioConfig:
    """Everything a command needs, resolved from files and command-line flags."""

    model_path: str
    k_star: Optional[int] = None
    N: Optional[int] = None
    x0: Optional[list[float]] = None
    amplitude: float = 1.0
    sigma2_override: Optional[float] = None
    dt_override: Optional[float] = None
    seed: int = 0
    n_trials: int = 1000
    fixed_amplitude: Optional[float] = None
    noisy: bool = False
    scenario_path: Optional[str] = None
    system: DiscreteLTISystem = field(default=None, repr=False)
    continuous: Optional[ContinuousSpec] = field(default=None, repr=False)

    @classmethod
    def load(cls, model_path: str, scenario_path: Optional[str] = None, **flags: Any) -> "ScenarioConfig":
        """Read the model (and optional sidecar) and apply flag overrides (``None`` = unset)."""
        doc = _load_json(model_path, "model")
        unknown = set(doc) - MODEL_KEYS - SCENARIO_KEYS
        if unknown:
            raise ConfigError(f"{model_path}: unknown field(s) {sorted(unknown)}")
        sys, cont = parse_model(doc, model_path)
        scen = {k: doc[k] for k in SCENARIO_KEYS if k in doc}
        if scenario_path:
            side = _load_json(scenario_path, "scenario")
            unknown = set(side) - SCENARIO_KEYS
            if unknown:
                raise ConfigError(f"{scenario_path}: unknown field(s) {sorted(unknown)}")
            scen.update(side)
        cfg = cls(model_path=str(model_path), scenario_path=scenario_path)
        for key in ("k_star", "N"):
            if key in scen:
                v = scen[key]
                if isinstance(v, bool) or not isinstance(v, int):
                    raise ConfigError(f"scenario field '{key}' must be an integer, got {v!r}")
                setattr(cfg, key, v)
        if "amplitude" in scen:
            cfg.amplitude = _number(scen, "amplitude", "scenario")
        if "x0" in scen:
            cfg.x0 = _vector(scen, "x0", sys.n, "scenario")
        for key, value in flags.items():
            if value is not None:
                setattr(cfg, key, value)
        if cfg.x0 is not None and len(cfg.x0) != sys.n:
            raise ConfigError(f"x0 must have {sys.n} entries, got {len(cfg.x0)}")
        if cfg.sigma2_override is not None:
            if cfg.sigma2_override < 0:
                raise ConfigError(f"--sigma2 must be >= 0, got {cfg.sigma2_override}")
            sys = sys.with_noise(cfg.sigma2_override)
        if cfg.dt_override is not None:
            if cfg.dt_override <= 0:
                raise ConfigError(f"--dt must be > 0, got {cfg.dt_override}")
            sys = cont.sample(cfg.dt_override, sys.sigma2) if cont else replace(sys, dt=cfg.dt_override)
        cfg.system = sys
        cfg.continuous = cont
        return cfg

    def require(self, *names: str) -> None:
        for name in names:
            if getattr(self, name) is None:
                flag = {"k_star": "--k-star", "N": "--horizon"}.get(name, name)
                raise ConfigError(f"missing '{name}': set it in the model/scenario file or pass {flag}")

    def scenario(self) -> StepScenario:
        self.require("k_star", "N")
        return StepScenario(self.k_star, self.N, self.x0, self.amplitude)

    def resolved(self, **extra: Any) -> dict:
        """JSON-able record of the resolved inputs, for CSV comment headers."""
        d = {k: v for k, v in asdict(self).items() if k not in ("system", "continuous")}
        d["model"] = model_to_dict(self.system)
        if self.continuous is not None:
            d["continuous"] = asdict(self.continuous)
        d.update(extra)
        return d


def read_measurements(path: str | Path) -> np.ndarray:
    """Read a ``k,y`` CSV (``#`` lines ignored) into ``y_0..y_N``."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ConfigError(f"cannot read measurement file {path}: {exc.strerror}") from None
    values: list[float] = []
    with fh:
        rows = ((i, row) for i, row in enumerate(csv.reader(fh), start=1)
                if row and not row[0].lstrip().startswith("#"))
        first = next(rows, None)
        if first is None or [c.strip() for c in first[1]] != ["k", "y"]:
            raise ConfigError(f"{path}: expected header 'k,y'")
        for lineno, row in rows:
            if len(row) != 2:
                raise ConfigError(f"{path}: line {lineno}: expected 2 columns, got {len(row)}")
            try:
                k = int(row[0])
                y = float(row[1])
            except ValueError:
                raise ConfigError(f"{path}: line {lineno}: non-numeric cell in {row!r}") from None
            if k != len(values):
                raise ConfigError(f"{path}: line {lineno}: expected k={len(values)}, got k={k}")
            if not math.isfinite(y):
                raise ConfigError(f"{path}: line {lineno}: non-finite y value {row[1]!r}")
            values.append(y)
    if len(values) < 2:
        raise ConfigError(f"{path}: need at least 2 samples, got {len(values)}")
    return np.array(values)


def fmt(x: float) -> str:
    """Shortest round-tripping text for a float."""
    return repr(float(x))


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]],
              config: Optional[dict] = None) -> None:
    """Write a CSV, preceded by a ``# config: {...}`` line when ``config`` is given."""
    try:
        with open(path, "w", newline="") as fh:
            if config is not None:
                fh.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc.strerror}") from None
