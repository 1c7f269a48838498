"""Experiment configuration files.

A config is a YAML document::

    model:
      n: 3                      # number of buyers
      structure: mixture        # independent | mixture
      rho: 0.5                  # mixture only: P(all buyers share one draw)
      replicated: false         # wrap in an i.i.d. replica block
      base: {family: power_law, m: 2, scale: 1}
      # independent only, instead of base/n:
      # marginals: [{family: uniform, lo: 0, hi: 1}, {family: exponential, rate: 2}]
    run:
      seed: 7
      samples: 1000000
      format: table             # table | csv | json
      out: null                 # write here instead of stdout
      workers: 1
      mode: auto                # auto (exact F_max) | sampled
      checks: [MainTheorem, ReplicationCorollary]   # verify only; default all
      price: 0.5                # simulate only: extra fixed posted price / reserve
    sweep:
      param: m
      range: "1.1:5:0.1"        # LO:HI:STEP
    tolerance:
      sigma_band: 3
      identity_band: 4
      exact_tol: 1.0e-9

Family names are case-insensitive and ignore ``_``/``-`` (``PowerLaw`` works).
Families and their parameters: ``power_law(m, scale=1)``,
``exponential(rate)``, ``uniform(lo, hi)``, ``point_mass(v)``,
``lognormal(mu, sigma)``, ``empirical(values | path)``; ``path`` points to a
file of newline-delimited positive decimals, relative to the config file.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import yaml

from .distributions import (
    CommonValueMixture,
    Empirical,
    Exponential,
    Independent,
    JointValuationModel,
    LogNormal,
    Marginal,
    PointMass,
    PowerLaw,
    Replicated,
    Uniform,
)
from .verification import ALL_CHECKS, Tolerances

FAMILIES = {
    "power_law": (PowerLaw, ("m",), ("scale",)),
    "exponential": (Exponential, ("rate",), ()),
    "uniform": (Uniform, ("lo", "hi"), ()),
    "point_mass": (PointMass, ("v",), ()),
    "lognormal": (LogNormal, ("mu", "sigma"), ()),
}
# PowerLaw, power_law and power-law all name the same family
_FAMILY_KEYS = {k.replace("_", ""): k for k in list(FAMILIES) + ["empirical"]}
FORMATS = ("table", "csv", "json")
MODES = ("auto", "sampled")


class ConfigError(ValueError):
    """Bad config: carries the file, dotted field path and line when known."""

    def __init__(self, message: str, source: str = "<config>", path: str = "", line: Optional[int] = None):
        self.message, self.source, self.path, self.line = message, source, path, line
        where = source + (f":{line}" if line else "") + (f": {path}" if path else "")
        super().__init__(f"{where}: {message}")


@dataclass
class ExperimentConfig:
    model: JointValuationModel
    model_spec: Dict[str, Any]
    seed: int = 0
    samples: int = 1_000_000
    format: str = "table"
    out: Optional[str] = None
    workers: int = 1
    mode: str = "auto"
    checks: Tuple[str, ...] = ALL_CHECKS
    price: Optional[float] = None
    sweep_param: Optional[str] = None
    sweep_range: Optional[Tuple[float, float, float]] = None
    tolerance: Tolerances = field(default_factory=Tolerances)

    def echo(self) -> Dict[str, Any]:
        """Resolved settings, for embedding in reports."""
        return {
            "model": self.model_spec,
            "seed": self.seed,
            "samples": self.samples,
            "mode": self.mode,
            "checks": list(self.checks),
            "price": self.price,
            "sweep": {"param": self.sweep_param, "range": list(self.sweep_range) if self.sweep_range else None},
            "tolerance": {
                "sigma_band": self.tolerance.sigma_band,
                "identity_band": self.tolerance.identity_band,
                "exact_tol": self.tolerance.exact_tol,
            },
        }


# ---------------------------------------------------------------------------


def _line_index(text: str) -> Dict[Tuple[str, ...], int]:
    """Map every mapping key path in a YAML document to its 1-based line."""
    out: Dict[Tuple[str, ...], int] = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return out

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                path = prefix + (str(key.value),)
                out[path] = key.start_mark.line + 1
                walk(value, path)
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                out[prefix + (str(i),)] = item.start_mark.line + 1
                walk(item, prefix + (str(i),))

    if root is not None:
        walk(root, ())
    return out


class _Reader:
    def __init__(self, source: str, lines: Dict[Tuple[str, ...], int], base_dir: Path):
        self.source, self.lines, self.base_dir = source, lines, base_dir

    def fail(self, path: Sequence[str], message: str):
        p = tuple(str(x) for x in path)
        line = None
        for k in range(len(p), 0, -1):
            if p[:k] in self.lines:
                line = self.lines[p[:k]]
                break
        raise ConfigError(message, self.source, ".".join(p), line)

    def number(self, raw, path, positive=False, integer=False):
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            self.fail(path, f"expected a number, got {raw!r}")
        if integer and int(raw) != raw:
            self.fail(path, f"expected an integer, got {raw!r}")
        if positive and not raw > 0:
            self.fail(path, f"must be positive, got {raw!r}")
        return int(raw) if integer else float(raw)

    def mapping(self, raw, path) -> dict:
        if raw is None:
            return {}
        if not isinstance(raw, dict):
            self.fail(path, "expected a mapping")
        return raw

    def marginal(self, raw, path) -> Tuple[Marginal, dict]:
        raw = self.mapping(raw, path)
        fam = raw.get("family")
        if isinstance(fam, str):
            fam = _FAMILY_KEYS.get(fam.lower().replace("_", "").replace("-", ""), fam)
        if fam == "empirical":
            if "values" in raw:
                vals = raw["values"]
                if not isinstance(vals, list):
                    self.fail(list(path) + ["values"], "expected a list of positive numbers")
                try:
                    dist = Empirical(tuple(self.number(v, list(path) + ["values", i]) for i, v in enumerate(vals)))
                except ValueError as exc:
                    self.fail(list(path) + ["values"], str(exc))
                return dist, {"family": "empirical", "values": list(dist.values)}
            if "path" in raw:
                file = Path(raw["path"])
                if not file.is_absolute():
                    file = self.base_dir / file
                try:
                    dist = Empirical.from_file(file)
                except (OSError, ValueError) as exc:
                    self.fail(list(path) + ["path"], str(exc))
                return dist, {"family": "empirical", "path": str(raw["path"]), "size": dist.size}
            self.fail(path, "empirical family needs 'values' or 'path'")
        if fam not in FAMILIES:
            self.fail(list(path) + ["family"], f"unknown family {fam!r}; choose from {sorted(FAMILIES) + ['empirical']}")
        cls, required, optional = FAMILIES[fam]
        unknown = set(raw) - {"family", *required, *optional}
        if unknown:
            self.fail(list(path) + [sorted(unknown)[0]], f"unknown parameter for {fam}")
        kwargs = {}
        for name in required:
            if name not in raw:
                self.fail(path, f"{fam} needs parameter {name!r}")
            kwargs[name] = self.number(raw[name], list(path) + [name])
        for name in optional:
            if name in raw:
                kwargs[name] = self.number(raw[name], list(path) + [name])
        try:
            dist = cls(**kwargs)
        except ValueError as exc:
            self.fail(path, str(exc))
        return dist, dist.to_dict()

    def model(self, raw) -> Tuple[JointValuationModel, dict]:
        raw = self.mapping(raw, ["model"])
        if not raw:
            self.fail(["model"], "missing model section")
        structure = raw.get("structure", "independent")
        spec: Dict[str, Any] = {"structure": structure}
        if "marginals" in raw:
            if structure != "independent":
                self.fail(["model", "marginals"], "per-buyer marginals need structure: independent")
            if not isinstance(raw["marginals"], list) or not raw["marginals"]:
                self.fail(["model", "marginals"], "expected a non-empty list")
            pairs = [self.marginal(m, ["model", "marginals", i]) for i, m in enumerate(raw["marginals"])]
            model: JointValuationModel = Independent(tuple(p[0] for p in pairs))
            spec["marginals"] = [p[1] for p in pairs]
            spec["n"] = model.n
        else:
            n = self.number(raw.get("n", 1), ["model", "n"], positive=True, integer=True)
            base, base_spec = self.marginal(raw.get("base"), ["model", "base"])
            spec.update(n=n, base=base_spec)
            if structure == "independent":
                model = Independent.iid(base, n)
            elif structure == "mixture":
                rho = self.number(raw.get("rho", 0.0), ["model", "rho"])
                if not 0.0 <= rho <= 1.0:
                    self.fail(["model", "rho"], "rho must lie in [0, 1]")
                model = CommonValueMixture(rho, base, n)
                spec["rho"] = rho
            else:
                self.fail(["model", "structure"], f"unknown structure {structure!r}; use independent or mixture")
        replicated = raw.get("replicated", False)
        if not isinstance(replicated, bool):
            self.fail(["model", "replicated"], "expected true or false")
        if replicated:
            model = Replicated(model)
        spec["replicated"] = replicated
        return model, spec


def parse_range(text: str, source: str = "--param-range") -> Tuple[float, float, float]:
    parts = str(text).split(":")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"expected LO:HI:STEP, got {text!r}", source) from None
    if not (hi >= lo and step > 0):
        raise ConfigError(f"need HI >= LO and STEP > 0, got {text!r}", source)
    return lo, hi, step


def _set_dotted(doc: dict, dotted: str, value):
    keys = dotted.split(".")
    node = doc
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            node[k] = {}
        node = node[k]
    node[keys[-1]] = value


def load_config(
    path: Optional[str] = None,
    text: Optional[str] = None,
    overrides: Sequence[str] = (),
    flags: Optional[Dict[str, Any]] = None,
) -> ExperimentConfig:
    """Read a config file (or text), apply ``key.path=value`` overrides, then flags."""
    source = path or "<config>"
    if text is None:
        if path is None:
            text = ""
        else:
            try:
                text = Path(path).read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc.strerror}", source) from None
    try:
        doc = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"YAML syntax error: {problem}", source, line=mark.line + 1 if mark else None) from None
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a mapping", source, line=1)
    doc = copy.deepcopy(doc)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key.path=value, got {item!r}", "--set")
        key, val = item.split("=", 1)
        _set_dotted(doc, key.strip(), yaml.safe_load(val))

    reader = _Reader(source, _line_index(text), Path(path).parent if path else Path.cwd())
    unknown = set(doc) - {"model", "run", "sweep", "tolerance"}
    if unknown:
        reader.fail([sorted(unknown)[0]], "unknown section")
    model, spec = reader.model(doc.get("model"))
    run = reader.mapping(doc.get("run"), ["run"])
    flags = {k: v for k, v in (flags or {}).items() if v is not None}
    run = {**run, **{k: v for k, v in flags.items() if k in ("seed", "samples", "format", "out", "workers", "mode")}}

    seed = reader.number(run.get("seed", 0), ["run", "seed"], integer=True)
    if not 0 <= seed < 2**64:
        reader.fail(["run", "seed"], "seed must be a 64-bit unsigned integer")
    samples = reader.number(run.get("samples", 1_000_000), ["run", "samples"], positive=True, integer=True)
    fmt = run.get("format", "table")
    if fmt not in FORMATS:
        reader.fail(["run", "format"], f"format must be one of {FORMATS}")
    mode = run.get("mode", "auto")
    if mode not in MODES:
        reader.fail(["run", "mode"], f"mode must be one of {MODES}")
    workers = reader.number(run.get("workers", 1), ["run", "workers"], positive=True, integer=True)
    checks = run.get("checks", list(ALL_CHECKS))
    if isinstance(checks, str):
        checks = [c.strip() for c in checks.split(",") if c.strip()]
    for i, c in enumerate(checks):
        if c not in ALL_CHECKS:
            reader.fail(["run", "checks", i], f"unknown check {c!r}; choose from {list(ALL_CHECKS)}")
    price = run.get("price")
    if price is not None:
        price = reader.number(price, ["run", "price"], positive=True)

    sweep = reader.mapping(doc.get("sweep"), ["sweep"])
    rng_text = flags.get("param_range", sweep.get("range"))
    sweep_range = parse_range(rng_text, source if "param_range" not in flags else "--param-range") if rng_text else None
    sweep_param = flags.get("param", sweep.get("param"))

    tol_raw = reader.mapping(doc.get("tolerance"), ["tolerance"])
    tol_unknown = set(tol_raw) - {"sigma_band", "identity_band", "exact_tol"}
    if tol_unknown:
        reader.fail(["tolerance", sorted(tol_unknown)[0]], "unknown tolerance")
    tol = Tolerances(**{k: reader.number(v, ["tolerance", k], positive=True) for k, v in tol_raw.items()})

    return ExperimentConfig(
        model=model,
        model_spec=spec,
        seed=seed,
        samples=samples,
        format=fmt,
        out=run.get("out"),
        workers=workers,
        mode=mode,
        checks=tuple(checks),
        price=price,
        sweep_param=sweep_param,
        sweep_range=sweep_range,
        tolerance=tol,
    )


def with_base_param(cfg: ExperimentConfig, param: str, value: float) -> JointValuationModel:
    """The config's model with one numeric parameter of the base family replaced."""
    spec = cfg.model_spec
    if "base" not in spec:
        raise ConfigError("sweeps need a model with a single 'base' family", path="model")
    base = dict(spec["base"])
    fam = base.get("family")
    if fam not in FAMILIES:
        raise ConfigError(f"cannot sweep the {fam} family", path="model.base.family")
    cls, required, optional = FAMILIES[fam]
    if param not in required + optional:
        raise ConfigError(
            f"{param!r} is not a numeric parameter of {fam}; choose from {list(required + optional)}",
            path="sweep.param",
        )
    base[param] = value
    raw = {"model": {**{k: v for k, v in spec.items() if k != "marginals"}, "base": base}}
    reader = _Reader("<sweep>", {}, Path.cwd())
    model, _ = reader.model(raw["model"])
    return model


def default_sweep_param(cfg: ExperimentConfig) -> str:
    fam = cfg.model_spec.get("base", {}).get("family")
    if fam not in FAMILIES:
        raise ConfigError(f"cannot sweep the {fam} family", path="model.base.family")
    return FAMILIES[fam][1][0]


def sweep_values(lo: float, hi: float, step: float) -> List[float]:
    count = int((hi - lo) / step + 1e-9) + 1
    return [round(lo + i * step, 12) for i in range(count)]
