"""Run configuration files.

An INI-style file with ``[section]`` headers and ``key = value`` lines::

    [system]
    name = pendulum          # or: dataset_path = samples.csv

    [domain]
    lo = -1, -1
    hi = 1, 1

    [target]
    lo = -0.1, -0.1
    hi = 0.1, 0.1

    [lipschitz]
    M = 1.15, 3.15

    [lp]
    mu = 100

    [loop]
    limit = 10
    seed = 0
    initial_points = 2

For a built-in system the domain, target and Lipschitz sections default to
the system's own values. Errors name the file and line.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass
from pathlib import Path

from .certifier import CertifierConfig
from .polytope import Hyperbox
from .systems import BUILTIN, Oracle, builtin_example, dataset_oracle
from .uncertainty import Dataset, DataPoint, LipschitzBound

KNOWN = {
    "system": {"name", "dataset_path"},
    "domain": {"lo", "hi"},
    "target": {"lo", "hi"},
    "lipschitz": {"m"},
    "lp": {"mu", "backend"},
    "loop": {"limit", "seed", "initial_points", "max_data", "enrich_cap"},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunSpec:
    """Everything a command needs: certifier settings plus the field source."""

    path: Path
    certifier: CertifierConfig
    oracle: Oracle
    system: str | None
    dataset: Dataset | None
    text: str

    def initial_data(self) -> Dataset:
        from .certifier import initial_dataset

        if self.dataset is None:
            return initial_dataset(self.certifier, self.oracle)
        return self.dataset


def _line_of(lines, section, key=None):
    sec_re = re.compile(r"^\s*\[\s*" + re.escape(section) + r"\s*\]\s*$", re.I)
    in_sec = False
    for no, line in enumerate(lines, start=1):
        if line.strip().startswith("["):
            in_sec = bool(sec_re.match(line))
            if in_sec and key is None:
                return no
            continue
        if in_sec and key is not None:
            m = re.match(r"^\s*([^=:#;]+?)\s*[=:]", line)
            if m and m.group(1).lower() == key.lower():
                return no
    return None


def load_config(path) -> RunSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    lines = text.splitlines()
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        m = re.search(r"line:? (\d+)", str(exc))
        where = f"{path}:{m.group(1)}" if m else str(path)
        raise ConfigError(f"{where}: {exc.message if hasattr(exc, 'message') else exc}".splitlines()[0]) from None

    def fail(msg, section, key=None):
        no = _line_of(lines, section, key)
        where = f"{path}:{no}" if no else str(path)
        raise ConfigError(f"{where}: {msg}")

    for section in cp.sections():
        if section not in KNOWN:
            fail(f"unknown section [{section}]", section)
        for key in cp[section]:
            if key not in KNOWN[section]:
                fail(f"unknown key '{key}' in [{section}]", section, key)

    def get(section, key):
        if cp.has_option(section, key):
            return cp.get(section, key).strip()
        return None

    def vector(section, key):
        raw = get(section, key)
        if raw is None:
            return None
        try:
            vals = tuple(float(v) for v in raw.split(","))
        except ValueError:
            fail(f"{section}.{key} must be a comma-separated list of numbers, got '{raw}'", section, key)
        if len(vals) != 2:
            fail(f"{section}.{key} needs 2 components, got {len(vals)}", section, key)
        return vals

    def number(section, key, kind, default):
        raw = get(section, key)
        if raw is None:
            return default
        try:
            return kind(raw)
        except ValueError:
            fail(f"{section}.{key} must be {'an integer' if kind is int else 'a number'}, got '{raw}'", section, key)

    name = get("system", "name")
    ds_path = get("system", "dataset_path")
    if (name is None) == (ds_path is None):
        fail("set exactly one of system.name or system.dataset_path", "system")
    example = None
    if name is not None:
        if name not in BUILTIN:
            fail(f"unknown system '{name}'; choose from {', '.join(sorted(BUILTIN))}", "system", "name")
        example = builtin_example(name)

    def box(section, default):
        lo, hi = vector(section, "lo"), vector(section, "hi")
        if lo is None and hi is None and default is not None:
            return default
        if lo is None or hi is None:
            fail(f"[{section}] needs both lo and hi", section)
        try:
            return Hyperbox(lo, hi)
        except ValueError as exc:
            fail(str(exc), section, "lo")

    X = box("domain", example.domain if example else None)
    A = box("target", example.target if example else None)
    M = vector("lipschitz", "m")
    if M is None:
        if example is None:
            fail("lipschitz.M is required for dataset-backed runs", "lipschitz")
        bound = example.bound
    else:
        try:
            bound = LipschitzBound(M)
        except ValueError as exc:
            fail(str(exc), "lipschitz", "m")

    mu = number("lp", "mu", float, 100.0)
    backend = get("lp", "backend") or "builtin"
    if backend not in ("builtin", "highs"):
        fail(f"lp.backend must be 'builtin' or 'highs', got '{backend}'", "lp", "backend")
    try:
        cfg = CertifierConfig(
            X,
            A,
            bound,
            mu=mu,
            iteration_limit=number("loop", "limit", int, 10),
            seed=number("loop", "seed", int, 0),
            initial_random_points=number("loop", "initial_points", int, 2),
            max_data=number("loop", "max_data", int, 1500),
            enrich_cap=number("loop", "enrich_cap", int, 64),
            lp_backend=backend,
        )
    except ValueError as exc:
        msg = str(exc)
        section = "target" if "target" in msg or "origin" in msg else "loop" if "iteration" in msg or "initial" in msg else "lp" if "mu" in msg else "domain"
        fail(msg, section)

    dataset = None
    if example is not None:
        oracle = example.oracle
    else:
        csv_path = Path(ds_path)
        if not csv_path.is_absolute():
            csv_path = path.parent / csv_path
        try:
            dataset = Dataset.from_csv(csv_path, X, bound)
        except OSError as exc:
            fail(f"cannot read dataset {csv_path}: {exc.strerror}", "system", "dataset_path")
        if dataset.nearest_distance((0.0, 0.0)) > 1e-9:
            dataset = dataset.add([DataPoint((0.0, 0.0), (0.0, 0.0))])
        oracle = dataset_oracle(dataset, name=csv_path.name)
    return RunSpec(path, cfg, oracle, name, dataset, text)
