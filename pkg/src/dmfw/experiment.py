"""Run configuration, config-file I/O and experiment orchestration.

Config files are INI documents with the sections ``run``, ``topology``,
``constraint``, ``loss``, ``oracle``, ``schedule`` and an optional ``sweep``.
Every key is validated and unknown keys are rejected; errors carry the line
number of the offending key.
"""

from __future__ import annotations

import configparser
import copy
import io
import itertools
import re
from dataclasses import dataclass, field, fields, replace

from ._validation import check_open_unit, check_positive_int, check_positive_real
from .constraints import CONSTRAINT_KINDS, make_constraint
from .estimator import INIT_POLICIES, CentralizedMetaFrankWolfe, DecentralizedMetaFrankWolfe
from .exceptions import ConfigError
from .losses import LOSS_KINDS, make_stream
from .metrics import approximation_ratio
from .topology import TOPOLOGY_KINDS

__all__ = [
    "RunConfig",
    "ExperimentSpec",
    "load_config",
    "parse_config",
    "dump_config",
    "build_stream",
    "make_estimator",
    "run_experiment",
    "run_centralized_baseline",
    "expand_sweep",
]

RUN_MODES = ("exact", "stochastic", "centralized_baseline")
ORACLE_KINDS = ("ogd", "ftpl")
SWEEP_KEYS = ("topology_kind", "n", "seed", "oracle_kind", "mode", "alpha")
DEFAULT_SWEEP_CAP = 10_000

LOSS_PARAM_KEYS = {
    "quadratic": {"drift": float, "offset_scale": float},
    "sin_quadratic": {"drift": float, "c": float, "omega": float, "q_scale": float, "a_scale": float},
    "smooth_l1_regression": {"lookback": int, "batch_size": int, "ar_coef": float, "innovation": float},
}


@dataclass
class RunConfig:
    name: str = "run"
    mode: str = "exact"
    T: int = 50
    master_seed: int = 0
    init_policy: str = "canonical_vertex"
    shadow_exact: bool = False
    diagnostics: bool = True
    identical_agent_seeds: bool = False
    with_baseline: bool = False
    output_dir: str = "runs"
    topology_kind: str = "cycle"
    n: int = 4
    p: float = 0.4
    constraint_kind: str = "l1_ball"
    dim: int = 5
    radius: float = 1.0
    lo: float = -1.0
    hi: float = 1.0
    loss_kind: str = "quadratic"
    noise_sigma: float = 0.0
    loss_seed: int | None = None
    identical_agents: bool = False
    loss_params: dict = field(default_factory=dict)
    oracle_kind: str = "ogd"
    step_scale: float | None = None
    amplitude: float | None = None
    L: int = 50
    A: float = 1.0
    alpha: float = 0.5

    def validate(self):
        """Raise ConfigError (without a line) on the first invalid field."""
        try:
            _check_name(self.name)
            _choice(self.mode, "mode", RUN_MODES)
            check_positive_int(self.T, "T")
            _choice(self.init_policy, "init_policy", INIT_POLICIES)
            _choice(self.topology_kind, "topology kind", TOPOLOGY_KINDS)
            check_positive_int(self.n, "n", minimum=2)
            if self.topology_kind == "erdos_renyi" and not 0.0 < self.p <= 1.0:
                raise ValueError(f"p must lie in (0,1], got {self.p}")
            _choice(self.constraint_kind, "constraint kind", tuple(CONSTRAINT_KINDS))
            check_positive_int(self.dim, "dim")
            _choice(self.loss_kind, "loss kind", tuple(LOSS_KINDS))
            check_positive_real(self.noise_sigma, "noise_sigma", allow_zero=True)
            unknown = set(self.loss_params) - set(LOSS_PARAM_KEYS[self.loss_kind])
            if unknown:
                raise ValueError(f"unknown {self.loss_kind} parameter(s): {sorted(unknown)}")
            if self.loss_kind == "smooth_l1_regression":
                lookback = self.loss_params.get("lookback", 13)
                if self.dim != lookback:
                    raise ValueError(f"dim mismatch: smooth_l1_regression needs dim = lookback = {lookback}, got {self.dim}")
            _choice(self.oracle_kind, "oracle kind", ORACLE_KINDS)
            if self.step_scale is not None:
                check_positive_real(self.step_scale, "step_scale")
            if self.amplitude is not None:
                check_positive_real(self.amplitude, "amplitude", allow_zero=True)
            check_positive_int(self.L, "L")
            check_positive_real(self.A, "A")
            check_open_unit(self.alpha, "alpha")
            self.constraint_set()
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    @property
    def seed_for_loss(self):
        return self.master_seed if self.loss_seed is None else self.loss_seed

    def constraint_set(self):
        params = {}
        if self.constraint_kind in ("l1_ball", "l2_ball"):
            params["radius"] = self.radius
        elif self.constraint_kind == "box":
            params = {"lo": self.lo, "hi": self.hi}
        return make_constraint(self.constraint_kind, self.dim, **params)


def _check_name(name):
    if not re.fullmatch(r"[A-Za-z0-9._-]+", name or ""):
        raise ValueError(f"name {name!r} must be filesystem safe ([A-Za-z0-9._-]+)")


def _choice(value, name, choices):
    if value not in choices:
        raise ValueError(f"{name} must be one of {list(choices)}, got {value!r}")


# -- config file schema ------------------------------------------------------
# (section, key) -> (RunConfig field, parser)


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _int(text):
    return int(text.strip(), 0)


def _float(text):
    return float(text.strip())


def _str(text):
    return text.strip()


SCHEMA = {
    "run": {
        "name": ("name", _str), "mode": ("mode", _str), "T": ("T", _int),
        "master_seed": ("master_seed", _int), "init_policy": ("init_policy", _str),
        "shadow_exact": ("shadow_exact", _bool), "diagnostics": ("diagnostics", _bool),
        "identical_agent_seeds": ("identical_agent_seeds", _bool),
        "with_baseline": ("with_baseline", _bool), "output_dir": ("output_dir", _str),
    },
    "topology": {"kind": ("topology_kind", _str), "n": ("n", _int), "p": ("p", _float)},
    "constraint": {
        "kind": ("constraint_kind", _str), "dim": ("dim", _int), "radius": ("radius", _float),
        "lo": ("lo", _float), "hi": ("hi", _float),
    },
    "loss": {
        "kind": ("loss_kind", _str), "noise_sigma": ("noise_sigma", _float),
        "seed": ("loss_seed", _int), "identical_agents": ("identical_agents", _bool),
    },
    "oracle": {
        "kind": ("oracle_kind", _str), "step_scale": ("step_scale", _float),
        "amplitude": ("amplitude", _float),
    },
    "schedule": {"L": ("L", _int), "A": ("A", _float), "alpha": ("alpha", _float)},
}

SWEEP_PARSERS = {"topology_kind": _str, "n": _int, "seed": _int, "oracle_kind": _str,
                 "mode": _str, "alpha": _float}

# Which config key each RunConfig field came from, for line-numbered errors.
_FIELD_KEY = {fld: (sec, key) for sec, keys in SCHEMA.items() for key, (fld, _) in keys.items()}


@dataclass
class ExperimentSpec:
    base: RunConfig
    sweep: dict = field(default_factory=dict)
    cap: int = DEFAULT_SWEEP_CAP

    @property
    def name(self):
        return self.base.name

    @property
    def output_dir(self):
        return self.base.output_dir

    def size(self):
        size = 1
        for values in self.sweep.values():
            size *= len(values)
        return size


def _line_index(text):
    """Map (section, key) to 1-based line numbers, and sections to header lines."""
    index = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.fullmatch(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            index.setdefault((section, None), lineno)
            continue
        m = re.match(r"([^=:]+?)\s*[=:]", line)
        if m and section is not None:
            index[(section, m.group(1).strip())] = lineno
    return index


def parse_config(text):
    """Parse config text into an :class:`ExperimentSpec`."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                       default_section="__defaults__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc.message if hasattr(exc, 'message') else exc}",
                          line=getattr(exc, "lineno", None)) from None
    lines = _line_index(text)
    cfg = RunConfig()
    sweep = {}
    cap = DEFAULT_SWEEP_CAP
    loss_params = {}
    loss_kind = parser.get("loss", "kind", fallback=cfg.loss_kind).strip()

    for section in parser.sections():
        if section != "sweep" and section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", line=lines.get((section, None)))
        for key, raw in parser.items(section):
            line = lines.get((section, key))
            try:
                if section == "sweep":
                    if key == "cap":
                        cap = check_positive_int(_int(raw), "cap")
                        continue
                    if key not in SWEEP_PARSERS:
                        raise ValueError(f"unknown sweep key {key!r}; expected one of {list(SWEEP_KEYS) + ['cap']}")
                    values = [SWEEP_PARSERS[key](v) for v in raw.split(",") if v.strip()]
                    if values:
                        sweep[key] = values
                elif key in SCHEMA[section]:
                    fld, conv = SCHEMA[section][key]
                    setattr(cfg, fld, conv(raw))
                elif section == "loss" and key in LOSS_PARAM_KEYS.get(loss_kind, {}):
                    loss_params[key] = LOSS_PARAM_KEYS[loss_kind][key](raw.strip())
                else:
                    raise ValueError(f"unknown key {key!r} in [{section}]")
            except ConfigError as exc:
                exc.line = exc.line or line
                raise
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}", line=line) from None
    cfg.loss_params = loss_params
    try:
        cfg.validate()
    except ConfigError as exc:
        raise ConfigError(str(exc), line=_guess_line(str(exc), lines)) from None
    spec = ExperimentSpec(base=cfg, sweep=sweep, cap=cap)
    if spec.size() > cap:
        raise ConfigError(f"sweep has {spec.size()} points, above the cap of {cap}",
                          line=lines.get(("sweep", None)))
    for point in expand_sweep(spec):
        try:
            point.validate()
        except ConfigError as exc:
            raise ConfigError(f"sweep point {point.name}: {exc}", line=lines.get(("sweep", None))) from None
    return spec


def _guess_line(message, lines):
    """Best-effort location of a validation error in the source."""
    for fld, (sec, key) in _FIELD_KEY.items():
        names = {fld, key, fld.replace("_", " ")}
        if any(re.match(rf"{re.escape(n)}\b", message) for n in names) and (sec, key) in lines:
            return lines[(sec, key)]
    if message.startswith("dim mismatch"):
        return lines.get(("constraint", "dim"))
    return None


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


def dump_config(cfg, sweep=None, cap=None):
    """Serialize a fully resolved config (every key explicit)."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    cfg = replace(cfg, loss_seed=cfg.seed_for_loss)
    for section, keys in SCHEMA.items():
        parser.add_section(section)
        for key, (fld, _) in keys.items():
            value = getattr(cfg, fld)
            if value is None:
                continue
            parser.set(section, key, _render(value))
    for key, value in sorted(cfg.loss_params.items()):
        parser.set("loss", key, _render(value))
    if sweep:
        parser.add_section("sweep")
        for key, values in sweep.items():
            parser.set("sweep", key, ", ".join(_render(v) for v in values))
        if cap is not None:
            parser.set("sweep", "cap", str(cap))
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def _render(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


_SWEEP_FIELD = {"topology_kind": "topology_kind", "n": "n", "seed": "master_seed",
                "oracle_kind": "oracle_kind", "mode": "mode", "alpha": "alpha"}


def expand_sweep(spec):
    """Cross product of the sweep lists as concrete RunConfigs."""
    if not spec.sweep:
        return [spec.base]
    keys = [k for k in SWEEP_KEYS if k in spec.sweep]
    points = []
    for combo in itertools.product(*(spec.sweep[k] for k in keys)):
        overrides = {_SWEEP_FIELD[k]: v for k, v in zip(keys, combo)}
        label = "_".join(f"{k}-{v}" for k, v in zip(keys, combo))
        points.append(replace(copy.deepcopy(spec.base), name=f"{spec.base.name}__{label}", **overrides))
    return points


# -- orchestration -----------------------------------------------------------


def build_stream(cfg):
    return make_stream(cfg.loss_kind, cfg.n, cfg.dim, cfg.T, constraint=cfg.constraint_set(),
                       identical_agents=cfg.identical_agents, noise_sigma=cfg.noise_sigma,
                       seed=cfg.seed_for_loss, **cfg.loss_params)


def make_estimator(cfg, baseline=False):
    baseline = baseline or cfg.mode == "centralized_baseline"
    cls = CentralizedMetaFrankWolfe if baseline else DecentralizedMetaFrankWolfe
    mode = "exact" if cfg.mode == "centralized_baseline" else cfg.mode
    return cls(
        topology=cfg.topology_kind, edge_prob=cfg.p, constraint=cfg.constraint_kind,
        radius=cfg.radius, lo=cfg.lo, hi=cfg.hi, L=cfg.L, A=cfg.A, alpha=cfg.alpha,
        mode=mode, oracle=cfg.oracle_kind, oracle_step_scale=cfg.step_scale,
        ftpl_amplitude=cfg.amplitude, init_policy=cfg.init_policy,
        random_state=cfg.master_seed, identical_agent_seeds=cfg.identical_agent_seeds,
        shadow_exact=cfg.shadow_exact, diagnostics=cfg.diagnostics,
    )


def run_experiment(cfg, stream=None, return_estimator=False):
    """Run ``cfg.T`` rounds and return the MetricsSeries (deterministic in the seed)."""
    cfg.validate()
    stream = build_stream(cfg) if stream is None else stream
    est = make_estimator(cfg).fit(stream)
    return (est.metrics_, est) if return_estimator else est.metrics_


def run_centralized_baseline(cfg, stream=None, return_estimator=False):
    """Centralized Meta Frank-Wolfe on ``F^t`` with the same schedule and oracle."""
    cfg.validate()
    stream = build_stream(cfg) if stream is None else stream
    est = make_estimator(cfg, baseline=True).fit(stream)
    return (est.metrics_, est) if return_estimator else est.metrics_


def run_with_baseline(cfg):
    """Decentralized run, baseline and the ratio of running losses."""
    stream = build_stream(cfg)
    dec = run_experiment(cfg, stream)
    base = run_centralized_baseline(cfg, stream)
    return dec, base, approximation_ratio(dec, base)


def config_fields():
    return [f.name for f in fields(RunConfig)]
