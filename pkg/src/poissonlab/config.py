"""Run configuration: model specs, config files, validation."""
from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigurationError
from .geometry import WarpedModel, certify

SUBCOMMANDS = ("spectrum", "green", "heat", "poisson", "flow", "verify")
ROUTES = ("radial", "green-integral", "exhaustion", "all")
PROFILES = ("quick", "full")
FLOW_PROFILES = ("gaussian", "resolvent", "zero")
CACHE_POLICIES = ("use", "rebuild", "off")

_SHORT = re.compile(r"^(hyperbolic|perturbed|euclidean)(\d)?$")


def parse_model(spec) -> WarpedModel:
    """Model from ``"hyperbolic2"``, ``"hyperbolic:K=-0.5,n=2"``, ``"perturbed:eta=0.1"``, or a dict."""
    if isinstance(spec, dict):
        spec = _model_to_spec(spec)
    spec = str(spec).strip()
    name, _, rest = spec.partition(":")
    n = 2
    m = _SHORT.match(name)
    if not m:
        raise ConfigurationError(f"unknown model {spec!r}")
    name = m.group(1)
    if m.group(2):
        n = int(m.group(2))
    params = {}
    for item in filter(None, rest.split(",")):
        k, _, v = item.partition("=")
        k = k.strip()
        try:
            if k == "n":
                n = int(v)
            else:
                params[k] = float(v)
        except ValueError as exc:
            raise ConfigurationError(f"bad model parameter {item!r}") from exc
    if name == "hyperbolic":
        params.setdefault("K", -1.0)
    if name == "perturbed":
        params.setdefault("eta", 0.1)
    try:
        return certify(WarpedModel(name, n, tuple(sorted(params.items()))))
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for {name}: {params}") from exc


def _floats(text):
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    try:
        return tuple(float(x) for x in str(text).split(",") if x.strip())
    except ValueError as exc:
        raise ConfigurationError(f"expected comma-separated numbers, got {text!r}") from exc


@dataclass
class RunConfig:
    subcommand: str
    model: str = "hyperbolic2"
    rmax: float = 12.0
    nr: int | None = None  # 384 for elliptic grids, 512 for the flow
    ntheta: int = 64
    poles: tuple = (2.0, 3.0, 4.0, 5.0)
    eps: float = 1.0
    route: str = "all"
    profile: str | None = None  # verify: quick/full; flow: initial profile
    out: str = "out"
    cache: str = "use"
    cache_dir: str | None = None  # default <out>/cache
    seed: int = 0
    source: str = "powerlaw:eps=1"
    h: float = 0.02
    t_final: float | None = None
    dt: float | None = None
    background_K: float = -0.5
    bump: dict = field(default_factory=lambda: {"amp": 0.3, "center": 0.0, "width": 1.0})
    monitor_radii: tuple = (2.0, 4.0)
    scheme: str = "semi-implicit"
    dump_fields: bool = False
    determinism: bool = False

    def validate(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigurationError(f"unknown subcommand {self.subcommand!r}")
        parse_model(self.model)
        if self.route not in ROUTES:
            raise ConfigurationError(f"route must be one of {ROUTES}")
        if self.profile is None:
            self.profile = "gaussian" if self.subcommand == "flow" else "quick"
        allowed = FLOW_PROFILES if self.subcommand == "flow" else PROFILES
        if self.profile not in allowed:
            raise ConfigurationError(f"profile for {self.subcommand} must be one of {allowed}")
        if self.cache not in CACHE_POLICIES:
            raise ConfigurationError(f"cache must be one of {CACHE_POLICIES}")
        if self.nr is None:
            self.nr = 512 if self.subcommand == "flow" else 384
        if not self.rmax > 0 or self.nr < 64 or self.ntheta < 32:
            raise ConfigurationError("grid below minimum (rmax > 0, nr >= 64, ntheta >= 32)")
        if not self.eps > 0:
            raise ConfigurationError("eps must be positive")
        if not self.h > 0:
            raise ConfigurationError("h must be positive")
        if not self.poles or any(p < 0 for p in self.poles):
            raise ConfigurationError("pole radii must be >= 0")
        for k in ("t_final", "dt"):
            v = getattr(self, k)
            if v is not None and not v > 0:
                raise ConfigurationError(f"{k} must be positive")
        if self.scheme not in ("semi-implicit", "explicit"):
            raise ConfigurationError("scheme must be semi-implicit or explicit")
        if not isinstance(self.bump, dict) or set(self.bump) - {"amp", "center", "width"}:
            raise ConfigurationError("bump takes keys amp, center, width")
        return self

    def to_dict(self):
        d = asdict(self)
        d["poles"] = list(self.poles)
        d["monitor_radii"] = list(self.monitor_radii)
        return d


def load_config_file(path):
    """Key-value document (JSON, or YAML for ``.yaml``/``.yml``)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text) if path.suffix in (".yaml", ".yml") else json.loads(text)
    except (ValueError, yaml.YAMLError) as exc:
        raise ConfigurationError(f"malformed config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError("config file must hold a mapping")
    return data


def build_config(subcommand, file_values=None, overrides=None) -> RunConfig:
    """Merge file values and flag overrides (flags win) into a validated config."""
    known = {f.name for f in fields(RunConfig)}
    merged = {}
    for src in (file_values or {}, overrides or {}):
        src = dict(src)
        grid = src.pop("grid", None)
        if grid is not None:
            if not isinstance(grid, dict):
                raise ConfigurationError("grid must be a mapping of rmax/nr/ntheta/h")
            src = {**grid, **src}
        for k, v in src.items():
            k = k.replace("-", "_")
            if k not in known:
                raise ConfigurationError(f"unknown config key {k!r}")
            if v is not None:
                merged[k] = v
    merged.pop("subcommand", None)
    if isinstance(merged.get("poles"), str) and merged["poles"].startswith("random:"):
        merged["poles"] = _random_poles(merged["poles"], merged)
    for k in ("poles", "monitor_radii"):
        if k in merged:
            merged[k] = _floats(merged[k])
    if isinstance(merged.get("model"), dict):
        merged["model"] = _model_to_spec(merged["model"])
    try:
        cfg = RunConfig(subcommand, **merged)
        if cfg.nr is not None:
            cfg.nr = int(cfg.nr)
        for k, typ in (("rmax", float), ("ntheta", int), ("eps", float), ("h", float),
                       ("seed", int), ("background_K", float)):
            setattr(cfg, k, typ(getattr(cfg, k)))
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"bad config value: {exc}") from exc
    return cfg.validate()


def _random_poles(spec, merged):
    """``random:N`` draws ``N`` pole radii in ``[1, rmax - 3]`` from the seeded generator."""
    try:
        count = int(spec.split(":", 1)[1])
        seed = int(merged.get("seed", 0))
        rmax = float(merged.get("rmax", RunConfig.rmax))
    except ValueError as exc:
        raise ConfigurationError(f"bad random pole spec {spec!r}") from exc
    if count < 1 or rmax <= 4:
        raise ConfigurationError("random poles need N >= 1 and rmax > 4")
    rng = np.random.default_rng(seed)
    return tuple(sorted(round(float(x), 2) for x in rng.uniform(1.0, rmax - 3.0, count)))


def _model_to_spec(d):
    """Accepts ``{"family", "n", "params": {...}}`` or flat ``{"family", "n", "eta": ...}``."""
    if "family" not in d:
        raise ConfigurationError("model mapping needs a 'family' key")
    flat = {k: v for k, v in d.items() if k not in ("family", "n", "params", "a_sq", "b_sq")}
    params = ",".join(f"{k}={v}" for k, v in sorted({**dict(d.get("params") or {}), **flat}.items()))
    spec = f"{d['family']}:n={d.get('n', 2)}"
    return spec + ("," + params if params else "")
