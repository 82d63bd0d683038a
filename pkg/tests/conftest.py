import functools

import pytest

from pwaroa.certifier import CertifierConfig, run
from pwaroa.systems import builtin_example

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_criterion(k: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[k] = (bool(ok), detail)


@functools.lru_cache(maxsize=None)
def certify_builtin(name: str, seed: int):
    ex = builtin_example(name)
    cfg = CertifierConfig(ex.domain, ex.target, ex.bound, seed=seed)
    return run(cfg, ex.oracle)


def config_text(name: str, seed: int) -> str:
    ex = builtin_example(name)
    fmt = lambda v: ", ".join(repr(float(x)) for x in v)  # noqa: E731
    return (
        f"[system]\nname = {name}\n\n"
        f"[domain]\nlo = {fmt(ex.domain.lower)}\nhi = {fmt(ex.domain.upper)}\n\n"
        f"[target]\nlo = {fmt(ex.target.lower)}\nhi = {fmt(ex.target.upper)}\n\n"
        f"[lipschitz]\nM = {fmt(ex.bound.M)}\n\n"
        f"[lp]\nmu = 100\n\n"
        f"[loop]\nlimit = 10\nseed = {seed}\ninitial_points = 2\n"
    )


@pytest.fixture
def write_config(tmp_path):
    def make(name: str, seed: int = 0):
        path = tmp_path / f"{name}-{seed}.ini"
        path.write_text(config_text(name, seed))
        return path

    return make


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        tr.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} - {detail}")
