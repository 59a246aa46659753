import json
import subprocess
import sys

import numpy as np
import pytest

from lognorm_cert.cli import main
from lognorm_cert.system_model import eval_matrix, load_scenario


@pytest.fixture
def out(tmp_path, monkeypatch):
    d = tmp_path / "out"
    monkeypatch.setenv("LOGNORM_OUT", str(d))
    return d


def run(capsys, *argv):
    code = main(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


class TestMu:
    def test_table(self, capsys):
        code, text, _ = run(capsys, "mu", "--matrix", "[[-11,10],[2,-3]]", "--kinds", "1,2,inf")
        assert code == 0
        rows = {line.split()[0]: line.split()[2] for line in text.splitlines()[1:]}
        assert rows == {"1": "7", "2": "0.211103", "inf": "-1"}

    def test_zero_matrix(self, capsys):
        code, text, _ = run(capsys, "mu", "--matrix", "[[0,0],[0,0]]", "--json")
        assert code == 0
        assert all(r["log_norm"] == 0 and r["induced_norm"] == 0 for r in json.loads(text)["results"])

    def test_single_kind_and_file(self, capsys, tmp_path):
        path = tmp_path / "a.json"
        path.write_text("[[-1,3],[-3,-2]]")
        code, text, _ = run(capsys, "mu", "--matrix", str(path), "--kinds", "2")
        assert code == 0 and text.splitlines()[1].split()[2] == "-1"

    @pytest.mark.parametrize("argv", [
        ["mu", "--matrix", "[[1,2]"],
        ["mu", "--matrix", "[[1,2],[3]]"],
        ["mu", "--matrix", "[[1,2],[3,4]]", "--kinds", "7"],
        ["mu"],
        ["nonsense"],
        ["mu", "--matrix", "[[1]]", "--tol", "abc"],
    ])
    def test_usage_errors(self, capsys, argv):
        assert run(capsys, *argv)[0] == 2


class TestCertify:
    def test_example2_certified(self, capsys, out):
        code, text, _ = run(capsys, "certify", "--scenario", "example2", "--kinds", "2")
        assert code == 0 and "certified-on-horizon" in text
        report = json.loads((out / "example2_certificate.json").read_text())
        assert report[0]["overall"] == "certified-on-horizon"
        for a in report[0]["assumptions"]:
            assert (out / a["evidence_ref"]).exists()

    def test_example2_column_norm(self, capsys, out):
        assert run(capsys, "certify", "--scenario", "example2", "--kinds", "1")[0] == 3

    def test_example3(self, capsys, out):
        code, text, _ = run(capsys, "certify", "--scenario", "example3", "--kinds", "2")
        assert code == 3 and "A3: fails" in text

    def test_inconclusive(self, capsys, out):
        # mu = -1 gives only -20 by T = 20, short of the divergence threshold
        assert run(capsys, "certify", "--scenario", "lti_hurwitz")[0] == 4

    def test_bad_config(self, capsys, out):
        assert run(capsys, "certify", "--scenario", "example3", "--param", "lam=-1")[0] == 2
        assert run(capsys, "certify", "--scenario", "nope.json")[0] == 2
        assert run(capsys, "certify", "--scenario", "example2", "--horizon", "-3")[0] == 2

    def test_round_trip(self, capsys, out, tmp_path):
        dump = tmp_path / "s.json"
        code, _, _ = run(capsys, "certify", "--scenario", "example2", "--param", "beta=2",
                         "--dump-scenario", str(dump))
        assert code == 0
        a = load_scenario("example2", {"beta": 2})
        b = load_scenario(str(dump))
        for t in np.linspace(0, 20, 101):
            assert np.array_equal(eval_matrix(a.matrix_function, t), eval_matrix(b.matrix_function, t))
            assert np.array_equal(a.rhs(t, np.ones(2)), b.rhs(t, np.ones(2)))

    def test_simulation_below_tolerance_floor(self, capsys, out, tmp_path):
        # by t = 60 both B(t) and |x(t)| sit under the integrator's absolute tolerance
        path = tmp_path / "demo.json"
        path.write_text(json.dumps({"name": "demo", "n": 2, "matrix": {"constant": [[-1, 3], [-3, -2]]},
                                    "perturbation": {"builtin": "decay"},
                                    "params": {"rate": 0.5, "x0": [1, 1]}}))
        code, _, _ = run(capsys, "certify", "--scenario", str(path), "--horizon", "60", "--simulate")
        assert code == 0
        sim = json.loads((out / "demo_certificate.json").read_text())[0]["simulation"]
        assert sim["passed"] and sim["resolution_floor"] > 0

    def test_byte_identical_reruns(self, capsys, tmp_path, monkeypatch):
        blobs = []
        for name in ("r1", "r2"):
            monkeypatch.setenv("LOGNORM_OUT", str(tmp_path / name))
            run(capsys, "certify", "--scenario", "example3", "--simulate", "--random-x0", "2", "--seed", "5")
            blobs.append({p.name: p.read_bytes() for p in sorted((tmp_path / name).iterdir())})
        assert blobs[0] == blobs[1]


class TestSimulate:
    def test_example2(self, capsys, out):
        code, _, _ = run(capsys, "simulate", "--scenario", "example2", "--x0", "[-5,2]", "--tf", "5", "--envelope")
        assert code == 0
        data = np.loadtxt(out / "example2_trajectory.csv", delimiter=",", skiprows=1)
        header = (out / "example2_trajectory.csv").read_text().splitlines()[0]
        assert header == "t,x1,x2,envelope"
        norms = np.linalg.norm(data[:, 1:3], axis=1)
        assert norms[-1] < norms[0]
        assert np.all(norms <= data[:, 3] * (1 + 1e-3))

    def test_example3(self, capsys, out):
        code, text, _ = run(capsys, "simulate", "--scenario", "example3", "--x0", "[0,0]", "--tf", "4", "--json")
        assert code == 0
        assert json.loads(text)["final_norm"] == pytest.approx(1 - np.exp(-4), abs=1e-3)

    def test_zero_horizon(self, capsys, out):
        code, _, _ = run(capsys, "simulate", "--scenario", "example2", "--x0", "[0,0]", "--tf", "0")
        assert code == 0
        lines = (out / "example2_trajectory.csv").read_text().splitlines()
        assert lines == ["t,x1,x2", "0,0,0"]

    def test_integrator_failure(self, capsys, out, tmp_path):
        path = tmp_path / "blowup.json"
        path.write_text(json.dumps({"name": "blowup", "matrix": {"constant": [[50, 0], [0, 50]]}}))
        code, _, err = run(capsys, "simulate", "--scenario", str(path), "--tf", "20")
        assert code == 5 and "partial" in err
        meta = json.loads((out / "blowup_trajectory.json").read_text())
        assert not meta["complete"] and 1 < meta["rows"] < 201
        assert len((out / "blowup_trajectory.csv").read_text().splitlines()) == meta["rows"] + 1

    def test_wrong_dimension(self, capsys, out):
        assert run(capsys, "simulate", "--scenario", "example2", "--x0", "[1,2,3]")[0] == 2


class TestClassify:
    def test_oscillatory(self, capsys, out):
        code, text, _ = run(capsys, "classify", "--fn", "oscillatory", "--classes", "D,AD")
        assert code == 0
        assert "D: tends-to-zero" in text and "AD: bounded-away" in text
        side = json.loads((out / "classify_oscillatory_D.json").read_text())
        assert side["verdict"] == "tends-to-zero"

    def test_needle(self, capsys, out):
        code, text, _ = run(capsys, "classify", "--fn", "needle", "--classes", "AD,V")
        assert code == 0
        assert "AD: tends-to-zero" in text and "V: bounded-away" in text

    def test_zero(self, capsys, out):
        code, text, _ = run(capsys, "classify", "--fn", "zero", "--classes", "V,AD,D", "--json")
        assert code == 0
        assert {r["verdict"] for r in json.loads(text)["results"].values()} == {"tends-to-zero"}

    def test_samples(self, capsys, out, tmp_path):
        ts = np.linspace(0, 30, 601)
        path = tmp_path / "decay.csv"
        np.savetxt(path, np.column_stack([ts, np.exp(-ts), np.zeros_like(ts)]), delimiter=",",
                   header="t,h1,h2", comments="")
        code, text, _ = run(capsys, "classify", "--samples", str(path), "--classes", "V,AD")
        assert code == 0 and text.count("tends-to-zero") == 2

    def test_unknown(self, capsys, out):
        assert run(capsys, "classify", "--fn", "bogus")[0] == 2
        assert run(capsys, "classify", "--fn", "zero", "--classes", "X")[0] == 2
        assert run(capsys, "classify")[0] == 2


class TestReproduce:
    @pytest.mark.parametrize("item", ["example1", "example3", "lemma2"])
    def test_items(self, capsys, out, item):
        code, text, _ = run(capsys, "reproduce", item)
        assert code == 0 and "reproduced" in text
        summary = json.loads((out / f"reproduce_{item}" / "summary.json").read_text())
        assert summary["passed"] and summary["checks"]

    def test_example1_lists_nine_values(self, capsys, out):
        _, text, _ = run(capsys, "reproduce", "example1")
        assert sum(line.startswith("PASS  mu_") and "[" in line and "mu_H" not in line
                   for line in text.splitlines()) == 9


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "lognorm_cert", "mu", "--matrix", "[[-1,3],[-3,-2]]",
                           "--kinds", "2"], capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 0 and "-1" in proc.stdout
