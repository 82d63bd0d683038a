import json
import subprocess
import sys
import xml.etree.ElementTree as ET
from collections import Counter

import numpy as np
import pytest

from conftest import certify_builtin
from pwaroa.certifier import NO_REGION, CertificationResult, CertifierConfig
from pwaroa.cli import main
from pwaroa.config import ConfigError, load_config
from pwaroa.lyapunov import PWALyapunov
from pwaroa.plotting import _level_segments, plot_figures
from pwaroa.polytope import Hyperbox
from pwaroa.report import RunReport, build_report
from pwaroa.systems import UnknownSystem, builtin_oracle
from pwaroa.tessellation import triangulate
from pwaroa.uncertainty import Dataset, LipschitzBound

SVG = "{http://www.w3.org/2000/svg}"

DOMAIN = "[domain]\nlo = -1, -1\nhi = 1, 1\n\n[target]\nlo = -0.1, -0.1\nhi = 0.1, 0.1\n"


def dataset_config(tmp_path, rows, M="1, 1"):
    (tmp_path / "data.csv").write_text("x1,x2,f1,f2\n" + "".join(f"{r}\n" for r in rows))
    path = tmp_path / "data.ini"
    path.write_text(f"[system]\ndataset_path = data.csv\n\n[lipschitz]\nM = {M}\n\n{DOMAIN}")
    return path


# built-in systems


def test_builtin_oracles():
    assert np.allclose(builtin_oracle("pendulum")((0.0, 0.0)), (0.0, 0.0))
    assert np.allclose(builtin_oracle("pendulum")((0.5, 0.0)), (0.0, -0.479426), atol=1e-6)
    assert np.allclose(builtin_oracle("vdp-inverted")((0.0, 0.1)), (-0.2, -0.2075))
    with pytest.raises(UnknownSystem):
        builtin_oracle("lorenz")


# configuration


def test_config_defaults_and_values(write_config):
    spec = load_config(write_config("pendulum", 3))
    assert spec.certifier.seed == 3
    assert spec.certifier.M.M == (1.15, 3.15)
    assert spec.certifier.mu == 100.0
    assert spec.system == "pendulum" and spec.dataset is None


@pytest.mark.parametrize(
    "text, line, words",
    [
        ("[system]\nname = pendulum\n[loop]\nsede = 3\n", 4, "unknown key"),
        ("[system]\nname = pendulum\n[lp]\nmu = fast\n", 4, "must be a number"),
        ("[system]\nname = pendulum\n[target]\nlo = -0.1, -0.1\nhi = 1.5, 0.1\n", 3, "contained"),
        ("[system]\nname = pendulm\n", 2, "unknown system"),
        ("[system]\nname = pendulum\n[domain]\nlo = -1\nhi = 1, 1\n", 4, "2 components"),
        ("[plot]\nx = 1\n", 1, "unknown section"),
    ],
)
def test_config_errors_name_the_line(tmp_path, text, line, words):
    path = tmp_path / "bad.ini"
    path.write_text(text)
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    assert f"bad.ini:{line}:" in str(exc.value)
    assert words in str(exc.value)


def test_config_needs_exactly_one_source(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[lp]\nmu = 1\n")
    with pytest.raises(ConfigError, match="exactly one"):
        load_config(path)


def test_dataset_config_adds_origin(tmp_path):
    spec = load_config(dataset_config(tmp_path, ["0.5,0.5,0.1,0.1"]))
    assert len(spec.dataset) == 2
    assert spec.dataset.nearest_distance((0, 0)) == 0.0


# bounds command


def test_bounds_single_origin_sample(tmp_path, capsys):
    path = dataset_config(tmp_path, ["0,0,0,0"])
    assert main(["bounds", str(path), "--at", "0.5,0.25"]) == 0
    assert capsys.readouterr().out.splitlines() == ["f1: [-0.5, 0.5]", "f2: [-0.5, 0.5]"]


def test_bounds_at_data_point_degenerate(tmp_path, capsys):
    path = dataset_config(tmp_path, ["0,0,0,0", "0.5,0.5,0.25,-0.125"])
    assert main(["bounds", str(path), "--at", "0.5,0.5"]) == 0
    assert capsys.readouterr().out.splitlines() == ["f1: [0.25, 0.25]", "f2: [-0.125, -0.125]"]


def test_bounds_inconsistent_data(tmp_path, capsys):
    path = dataset_config(tmp_path, ["0,0,0,0", "0.1,0,5,0"])
    assert main(["bounds", str(path), "--at", "0.5,0.5"]) == 1
    assert "samples 0 and 1" in capsys.readouterr().err


def test_bounds_outside_domain(tmp_path, capsys):
    path = dataset_config(tmp_path, ["0,0,0,0"])
    assert main(["bounds", str(path), "--at", "1.5,0"]) == 1
    assert "outside the domain" in capsys.readouterr().err


# certify command


def test_certify_rejects_target_outside_domain(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text("[system]\nname = pendulum\n[target]\nlo = -0.1, -0.1\nhi = 1.5, 0.1\n")
    assert main(["certify", str(path), "-o", str(tmp_path / "out")]) == 1
    assert "target set A must be contained in the domain X" in capsys.readouterr().err


def test_certify_dataset_with_too_little_data(tmp_path):
    path = dataset_config(tmp_path, ["0,0,0,0", "0.5,0.5,0.5,-0.5"], M="1.15, 3.15")
    out = tmp_path / "out"
    assert main(["certify", str(path), "-o", str(out)]) == 2
    rep = RunReport.read(out / "report.json")
    assert rep.terminated == NO_REGION
    assert rep.roa == []
    assert (out / "tessellation.svg").exists() and (out / "lyapunov.svg").exists()


def check_svg(path):
    tree = ET.parse(path)
    root = tree.getroot()
    assert root.tag == SVG + "svg"
    text = path.read_text()
    assert "<image" not in text
    for el in root.iter():
        for k, v in el.attrib.items():
            if k.endswith("href"):
                assert v.startswith("#")
    return root


def ids(root):
    return {el.get("id") for el in root.iter() if el.get("id")}


@pytest.fixture(scope="module")
def certified_dir(tmp_path_factory):
    from conftest import config_text

    d = tmp_path_factory.mktemp("pend")
    cfg = d / "pendulum.ini"
    cfg.write_text(config_text("pendulum", 0))
    out = d / "out"
    code = main(["certify", str(cfg), "-o", str(out)])
    return cfg, out, code


def test_certify_pendulum_writes_artifacts(certified_dir):
    _, out, code = certified_dir
    assert code == 0
    for name in ("report.json", "tessellation.svg", "lyapunov.svg", "metrics.csv"):
        assert (out / name).stat().st_size > 0
    root = check_svg(out / "tessellation.svg")
    assert {"tessellation", "data", "target", "roa-boundary", "roa-fill"} <= ids(root)
    assert "roa-boundary" in ids(check_svg(out / "lyapunov.svg"))
    header = (out / "metrics.csv").read_text().splitlines()[0]
    assert header == "iteration,N_d,N_c,N_v,T_data,T_con,T_opt"


def test_report_round_trips(certified_dir):
    _, out, _ = certified_dir
    text = (out / "report.json").read_text()
    rep = RunReport.from_json(text)
    assert rep.to_json() == text
    assert RunReport.from_json(rep.to_json()) == rep
    data = json.loads(text)
    assert data["metrics"]["columns"] == ["iteration", "N_d", "N_c", "N_v", "T_data", "T_con", "T_opt"]
    assert data["terminated"] == "certified"


def test_report_matches_library_run(certified_dir):
    _, out, _ = certified_dir
    rep = build_report(certify_builtin("pendulum", 0), "pendulum")
    assert rep.to_json() == (out / "report.json").read_text()


def test_plot_command_is_deterministic(certified_dir, tmp_path):
    _, out, _ = certified_dir
    assert main(["plot", str(out / "report.json"), "-o", str(tmp_path / "a")]) == 0
    assert main(["plot", str(out / "report.json"), "-o", str(tmp_path / "b")]) == 0
    for name in ("tessellation.svg", "lyapunov.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert (tmp_path / "a" / name).read_bytes() == (out / name).read_bytes()


def test_validate_command(certified_dir, capsys):
    cfg, out, _ = certified_dir
    assert main(["validate", str(cfg), str(out / "report.json"), "--samples", "20"]) == 0
    assert "passed: 1.0000" in capsys.readouterr().out


def test_roa_boundary_is_closed_around_origin():
    r = certify_builtin("pendulum", 0)
    t, V = r.lyapunov.tess, r.lyapunov
    segs = np.array(_level_segments(t.vertices[t.cells], r.roa.cells, V.vertex_values()[t.cells], r.roa.alpha))
    ends = Counter(tuple(np.round(p, 9)) for p in segs.reshape(-1, 2))
    assert all(c % 2 == 0 for c in ends.values())
    # a ray from the origin crosses a closed curve around it an odd number of times
    for ang in (0.1234, 1.987, 3.5, 5.01):
        d = np.array([np.cos(ang), np.sin(ang)])
        hits = 0
        for p, q in segs:
            M = np.column_stack([d, p - q])
            if abs(np.linalg.det(M)) < 1e-14:
                continue
            s, u = np.linalg.solve(M, p)
            hits += s > 0 and 0 <= u < 1
        assert hits % 2 == 1


# plotting without a region


def toy_result():
    X = Hyperbox((-1, -1), (1, 1))
    t = triangulate([(-1, -1), (1, -1), (-1, 1), (1, 1)], X)
    V = PWALyapunov(t, np.zeros((2, 2)), np.zeros(2), np.zeros(4))
    cfg = CertifierConfig(X, Hyperbox((-0.1, -0.1), (0.1, 0.1)), LipschitzBound((1, 1)))
    data = Dataset([((0.0, 0.0), (0.0, 0.0))], X, cfg.M)
    return CertificationResult(NO_REGION, V, None, [], data, cfg, "toy")


def test_two_cell_toy_plot(tmp_path):
    paths = plot_figures(toy_result(), tmp_path)
    root = check_svg(paths[0])
    assert "roa-boundary" not in ids(root) and "roa-fill" not in ids(root)
    group = next(el for el in root.iter() if el.get("id") == "tessellation")
    # two triangles have five distinct edges
    assert len(list(group.iter(SVG + "path"))) == 5
    check_svg(paths[1])


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "pwaroa", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "certify" in proc.stdout and "validate" in proc.stdout
