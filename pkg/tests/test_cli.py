import json
import math

import pytest

from petallab.cli import main
from petallab.flows import truncated_flow_germ
from petallab.germs import corner_germ, germ_from_coeff_maps, identity_germ


@pytest.fixture(scope="module")
def germ_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("germs") / "ref.json"
    corner_germ(1, 1, -0.5, -0.5).save(path)
    return str(path)


@pytest.fixture(scope="module")
def thmb_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("germs") / "thmb.json"
    corner_germ(1, 1, -2.0, 1.0).save(path)
    return str(path)


def test_classify_ok(germ_file, capsys, tmp_path):
    out = tmp_path / "report.json"
    assert main(["classify", "--germ", germ_file, "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["form"] == "corner" and report["M"] == 1 and report["N"] == 1
    assert report["petal"]["p"] == 0 and report["petal"]["q"] == 1
    assert "manifest" in report


def test_classify_inline_json(capsys):
    inline = json.dumps(corner_germ(1, 1, -0.5, -0.5).to_obj())
    assert main(["classify", "--germ", inline]) == 0


def test_classify_identity_exit_2(tmp_path, capsys):
    path = tmp_path / "id.json"
    identity_germ().save(path)
    assert main(["classify", "--germ", str(path)]) == 2
    assert "not tangent-to-identity" in capsys.readouterr().err


def test_malformed_json_exit_3(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{oops")
    assert main(["classify", "--germ", str(path)]) == 3
    assert "error" in capsys.readouterr().err


def test_missing_file_exit_3(capsys):
    assert main(["classify", "--germ", "/nonexistent/g.json"]) == 3


def test_flower_outputs(germ_file, tmp_path, capsys):
    out = tmp_path / "fl"
    code = main(["flower", "--germ", germ_file, "--samples", "800",
                 "--grid", "32x32", "--out", str(out), "--seed", "3"])
    assert code == 0
    report = json.loads((tmp_path / "fl.json").read_text())
    assert report["uncovered"] == 0
    pgm = (tmp_path / "fl.pgm").read_bytes()
    assert pgm.startswith(b"P5\n# manifest ")
    manifest = json.loads((tmp_path / "fl.manifest.json").read_text())
    assert manifest["hash"] in pgm[:64].decode("latin1")


def test_escape_deterministic_and_parallel(thmb_file, tmp_path):
    args = ["escape", "--germ", thmb_file, "--grid", "12x12",
            "--window=-0.1:0.1:-0.1:0.1", "--max-steps", "20000"]
    out1, out2, out3 = (tmp_path / n for n in ("e1", "e2", "e3"))
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert main(args + ["--out", str(out3), "--jobs", "3"]) == 0
    b1 = (tmp_path / "e1.pgm").read_bytes()
    assert b1 == (tmp_path / "e2.pgm").read_bytes()
    assert b1 == (tmp_path / "e3.pgm").read_bytes()
    stats = json.loads((tmp_path / "e1.json").read_text())
    assert stats["escaped"] > 0


def test_escape_hypothesis_failure_exit_2(germ_file, capsys):
    code = main(["escape", "--germ", germ_file, "--grid", "4x4"])
    assert code == 2


def test_resolve_germ(tmp_path, capsys):
    path = tmp_path / "flow.json"
    truncated_flow_germ(1, 0, 1, -1, order=8, exact=True).save(path)
    out = tmp_path / "tree"
    assert main(["resolve", "--germ", str(path), "--out", str(out)]) == 0
    obj = json.loads((tmp_path / "tree.json").read_text())
    assert obj["summary"]["model_counts"] == {"ii": 1}
    dot = (tmp_path / "tree.dot").read_text()
    assert dot.splitlines()[0].startswith("// manifest")


def test_resolve_field_input(tmp_path):
    field = [
        {"component": "dx", "monomials": [[0, 1, "1", "1", "0", "1"]]},
        {"component": "dy", "monomials": [[2, 0, "1", "1", "0", "1"]]},
    ]
    path = tmp_path / "field.json"
    path.write_text(json.dumps(field))
    out = tmp_path / "ftree"
    assert main(["resolve", "--field", str(path), "--out", str(out)]) == 0
    obj = json.loads((tmp_path / "ftree.json").read_text())
    assert obj["summary"]["leaf_counts"]["Reduced-nondegenerate"] == 3


def test_curve_csv(tmp_path):
    path = tmp_path / "g.json"
    germ_from_coeff_maps({(1, 0): 1 + 0j, (2, 0): -1 + 0j},
                         {(0, 1): 1 + 0j, (1, 1): -1 + 0j, (2, 0): 1 + 0j},
                         8).save(path)
    out = tmp_path / "curve.csv"
    assert main(["curve", "--germ", str(path), "--grid", "48x25",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# manifest")
    assert lines[1] == "re_x,im_x,re_u,im_u,residual"
    assert len(lines) == 2 + 48 * 25


def test_fatou_csv(germ_file, tmp_path):
    from petallab import dynamics as dyn
    from petallab.germs import normalize
    from petallab.sectors import DomainSpec, KIND_V

    F = corner_germ(1, 1, -0.5, -0.5)
    _, _, petal = normalize(F)
    spec = DomainSpec(petal=petal, epsilon=1 / 32, theta=math.pi / 6, r=0.7,
                      kind=KIND_V)
    pts = []
    for zr, w in ((60.0, 1.0 + 0j), (90.0, 0.8 + 0.3j)):
        x, y = dyn.chart_inverse(F, spec, zr + 4j, w)
        pts.append([x.real, x.imag, y.real, y.imag])
    pfile = tmp_path / "pts.json"
    pfile.write_text(json.dumps(pts))
    out = tmp_path / "fatou.csv"
    assert main(["fatou", "--germ", germ_file, "--points", str(pfile),
                 "--out", str(out)]) == 0
    rows = [l for l in out.read_text().splitlines()[2:] if l]
    assert len(rows) == 2
    for row in rows:
        fields = row.split(",")
        assert fields[-1] == "ok"
        assert float(fields[-2]) < 1e-8


def test_oracle_orbit_csv(tmp_path):
    out = tmp_path / "orbit.csv"
    code = main(["oracle", "--M", "1", "--N", "1", "--a=-0.5,0", "--b=-0.5,0",
                 "--point", "0.05,0:0.05,0", "--steps", "300",
                 "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[1].split(",")[:4] == ["j", "re_x", "im_x", "re_y"]
    assert len(lines) == 2 + 301


def test_env_variable_defaults(germ_file, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("PETALLAB_SAMPLES", "64")
    # rebuild the parser under the env override
    code = main(["flower", "--germ", germ_file, "--seed", "1"])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["total"] == 64
