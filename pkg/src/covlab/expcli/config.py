"""Plain-text experiment configs.

One ``key = value`` per line, ``[section]`` headers, ``#`` starts a comment.
Lists are comma-separated. Example::

    [scenario]
    id = dsbs_bsc
    kind = covering
    source = dsbs 0.1
    kernel = bsc 0.2

    [acceptance]
    kind = distortion_threshold
    level = 0.35

    [distortion]
    kind = hamming

    [sweep]
    n = 4, 8, 12
    gamma = 0.5
    trials = 20
    seed = 7
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import CovlabError
from ..prob import (ConditionalKernel, FiniteDistribution, bsc, dsbs, identity_kernel, load_table,
                    parse_distribution, parse_kernel, product, uniform)

KINDS = ("covering", "region")
ACCEPTANCE_KINDS = ("full", "distortion_threshold", "density_typical")


class ConfigError(CovlabError, ValueError):
    """All problems found in a config, each with its line number (0 = whole file)."""

    def __init__(self, errors: list[tuple[int, str]]):
        self.errors = errors
        super().__init__("\n".join(f"line {ln}: {msg}" if ln else msg for ln, msg in errors))


def _int(v):
    f = float(v)
    if not f.is_integer():
        raise ValueError(f"expected an integer, got {v!r}")
    return int(f)


def _float(v):
    f = float(v)
    if not math.isfinite(f):
        raise ValueError(f"expected a finite number, got {v!r}")
    return f


def _list(conv):
    def parse(v):
        items = [s.strip() for s in v.split(",") if s.strip()]
        if not items:
            raise ValueError("empty list")
        return tuple(conv(s) for s in items)
    return parse


# section -> key -> (parser, default); a default of ... marks a required key
SCHEMA: dict[str, dict[str, tuple]] = {
    "scenario": {"id": (str, ...), "kind": (str, "covering"), "source": (str, ...),
                 "kernel": (str, None)},
    "acceptance": {"kind": (str, "full"), "level": (_float, None), "margin": (_float, 0.0),
                   "radius": (_float, None)},
    "distortion": {"kind": (str, "hamming"), "table": (str, None)},
    "sweep": {"n": (_list(_int), ...), "gamma": (_list(_float), ...), "trials": (_int, 20),
              "seed": (_int, ...), "m_cap": (_int, 2**22), "method": (str, "auto")},
    "region": {"target_d": (_list(_float), ...), "aux_sizes": (_list(_int), None),
               "points": (_int, 9), "distortion": (str, "hamming_pair"), "k2": (str, None)},
    "output": {"path": (str, ".")},
}
REQUIRED_SECTIONS = {"covering": ("scenario", "sweep"), "region": ("scenario", "region")}


def _missing(raw, sections) -> list[tuple[int, str]]:
    return [(0, f"missing required key {key!r} in [{sec}]")
            for sec in sections for key, (_, default) in SCHEMA[sec].items()
            if default is ... and key not in raw.get(sec, {})]


@dataclass(frozen=True)
class ExperimentConfig:
    scenario_id: str
    kind: str
    source: FiniteDistribution = field(repr=False)
    source_spec: str
    values: dict = field(repr=False)
    kernel: ConditionalKernel | None = field(default=None, repr=False)
    base_dir: Path = Path(".")
    text: str = field(default="", repr=False)

    def get(self, section: str, key: str):
        return self.values[section][key]

    @property
    def seed(self) -> int:
        return self.values["sweep"]["seed"]

    def sweep_points(self) -> list[tuple[int, float]]:
        """``(n, gamma)`` pairs, n-major."""
        s = self.values["sweep"]
        return list(itertools.product(s["n"], s["gamma"]))

    def with_seed(self, seed: int) -> "ExperimentConfig":
        vals = {k: dict(v) for k, v in self.values.items()}
        vals["sweep"]["seed"] = seed
        return ExperimentConfig(self.scenario_id, self.kind, self.source, self.source_spec, vals,
                                self.kernel, self.base_dir, self.text)

    def echo(self) -> dict:
        """Every parameter, defaults included, in JSON-friendly form."""
        return {sec: {k: (list(v) if isinstance(v, tuple) else v) for k, v in kv.items()}
                for sec, kv in self.values.items()}


def _load_table(spec: str, base_dir: Path, parser):
    path = Path(spec)
    if not path.is_absolute():
        path = base_dir / path
    return parser(path.read_text())


def parse_source(spec: str, base_dir: Path = Path(".")) -> FiniteDistribution:
    """``dsbs <p>``, ``uniform_pair <k>`` (independent uniform pair) or ``table <path>``."""
    parts = spec.split()
    if len(parts) != 2:
        raise ValueError(f"source must be '<family> <arg>', got {spec!r}")
    fam, arg = parts
    if fam == "dsbs":
        return dsbs(_float(arg))
    if fam == "uniform_pair":
        k = _int(arg)
        return FiniteDistribution(product(uniform(k), uniform(k)).weights)
    if fam == "table":
        return _load_table(arg, base_dir, parse_distribution)
    raise ValueError(f"unknown source family {fam!r}")


def parse_kernel_spec(spec: str, base_dir: Path = Path(".")) -> ConditionalKernel:
    """``bsc <q>``, ``identity <k>`` or ``table <path>``."""
    parts = spec.split()
    if len(parts) != 2:
        raise ValueError(f"kernel must be '<family> <arg>', got {spec!r}")
    fam, arg = parts
    if fam == "bsc":
        return bsc(_float(arg))
    if fam == "identity":
        return identity_kernel(_int(arg))
    if fam == "table":
        return _load_table(arg, base_dir, parse_kernel)
    raise ValueError(f"unknown kernel family {fam!r}")


def parse_config(text: str, base_dir: str | Path = ".") -> ExperimentConfig:
    base_dir = Path(base_dir)
    errors: list[tuple[int, str]] = []
    raw: dict[str, dict[str, tuple[int, str]]] = {}
    section = None
    for ln, line in enumerate(text.splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            if section not in SCHEMA:
                errors.append((ln, f"unknown section [{section}]"))
            raw.setdefault(section, {})
            continue
        if "=" not in s:
            errors.append((ln, f"expected 'key = value', got {s!r}"))
            continue
        if section is None:
            errors.append((ln, "key outside any section"))
            continue
        key, val = (x.strip() for x in s.split("=", 1))
        if section in SCHEMA and key not in SCHEMA[section]:
            errors.append((ln, f"unknown key {key!r} in [{section}]"))
            continue
        if key in raw[section]:
            errors.append((ln, f"duplicate key {key!r} in [{section}]"))
            continue
        raw[section][key] = (ln, val)

    values: dict[str, dict] = {}
    for sec, keys in SCHEMA.items():
        values[sec] = {}
        for key, (conv, default) in keys.items():
            if key in raw.get(sec, {}):
                ln, val = raw[sec][key]
                try:
                    values[sec][key] = conv(val)
                except (ValueError, TypeError) as e:
                    errors.append((ln, f"bad value for {key!r}: {e}"))
                    values[sec][key] = None if default is ... else default
            elif default is ...:
                values[sec][key] = None
            else:
                values[sec][key] = default

    kind = values["scenario"]["kind"]
    if kind not in KINDS:
        errors.append((_line(raw, "scenario", "kind"), f"kind must be one of {KINDS}, got {kind!r}"))
        errors += _missing(raw, ("scenario",))
    else:
        errors += _missing(raw, REQUIRED_SECTIONS[kind])

    source = kernel = None
    if values["scenario"]["source"] is not None:
        try:
            source = parse_source(values["scenario"]["source"], base_dir)
        except (ValueError, OSError, CovlabError) as e:
            errors.append((_line(raw, "scenario", "source"), f"source: {e}"))
    if kind == "covering":
        spec = values["scenario"]["kernel"]
        if spec is None:
            errors.append((0, "missing required key 'kernel' in [scenario]"))
        else:
            try:
                kernel = parse_kernel_spec(spec, base_dir)
            except (ValueError, OSError, CovlabError) as e:
                errors.append((_line(raw, "scenario", "kernel"), f"kernel: {e}"))
        acc = values["acceptance"]
        if acc["kind"] not in ACCEPTANCE_KINDS:
            errors.append((_line(raw, "acceptance", "kind"), f"acceptance kind must be one of {ACCEPTANCE_KINDS}"))
        elif acc["kind"] == "distortion_threshold" and acc["level"] is None:
            errors.append((0, "missing required key 'level' in [acceptance]"))
        elif acc["kind"] == "density_typical" and acc["radius"] is None:
            errors.append((0, "missing required key 'radius' in [acceptance]"))
        for key in ("n", "trials", "m_cap"):
            v = values["sweep"][key]
            vs = v if isinstance(v, tuple) else (v,)
            if v is not None and any(x < 1 for x in vs):
                errors.append((_line(raw, "sweep", key), f"{key} must be >= 1"))
        if values["sweep"]["gamma"] is not None and any(g <= 0 for g in values["sweep"]["gamma"]):
            errors.append((_line(raw, "sweep", "gamma"), "gamma must be > 0"))
        if values["sweep"]["method"] not in ("auto", "dense", "scan", "enumerate"):
            errors.append((_line(raw, "sweep", "method"), "method must be auto, dense, scan or enumerate"))
        if values["distortion"]["kind"] not in ("hamming", "table"):
            errors.append((_line(raw, "distortion", "kind"), "distortion kind must be hamming or table"))
        elif values["distortion"]["kind"] == "table" and values["distortion"]["table"] is None:
            errors.append((0, "missing required key 'table' in [distortion]"))
    if kind == "region" and values["region"]["k2"] is not None:
        try:
            parse_kernel_spec(values["region"]["k2"], base_dir)
        except (ValueError, OSError, CovlabError) as e:
            errors.append((_line(raw, "region", "k2"), f"k2: {e}"))

    if errors:
        raise ConfigError(sorted(errors, key=lambda e: e[0]))
    return ExperimentConfig(values["scenario"]["id"], kind, source, values["scenario"]["source"],
                            values, kernel, base_dir, text)


def _line(raw, sec, key) -> int:
    return raw.get(sec, {}).get(key, (0, None))[0]


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError([(0, f"cannot read {path}: {e}")]) from e
    return parse_config(text, path.parent)


def distortion_table(cfg: ExperimentConfig, k_u: int, k_w: int) -> np.ndarray:
    d = cfg.values["distortion"]
    if d["kind"] == "hamming":
        t = np.ones((k_u, k_w))
        for i in range(min(k_u, k_w)):
            t[i, i] = 0.0
        return t
    path = Path(d["table"])
    if not path.is_absolute():
        path = cfg.base_dir / path
    return load_table(path.read_text())
