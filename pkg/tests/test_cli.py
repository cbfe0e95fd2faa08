import json

import numpy as np
import pytest

from mcscore.cli import main
from mcscore.exceptions import UsageError
from mcscore.io import read_samples, write_samples


@pytest.fixture
def mixture_file(tmp_path):
    path = tmp_path / "mix.json"
    path.write_text(json.dumps([{"mean": [2.0], "weight": 0.5}, {"mean": [-2.0], "weight": 0.5}]))
    return path


def run(*argv):
    return main([str(a) for a in argv])


class TestSampleFiles:
    def test_csv_roundtrip_is_exact(self, tmp_path, rng):
        samples = rng.normal(size=(50, 3)) * 10.0 ** rng.integers(-300, 300, size=(50, 3))
        path = write_samples(tmp_path / "s.csv", samples)
        assert path.read_text().splitlines()[0] == "dim0,dim1,dim2"
        assert np.array_equal(read_samples(path), samples)

    def test_json_roundtrip_with_nan(self, tmp_path):
        samples = np.array([[1.0, 2.5], [np.nan, np.nan], [1e-310, -0.0]])
        back = read_samples(write_samples(tmp_path / "s.json", samples, "json"))
        np.testing.assert_array_equal(back, samples)

    def test_empty_and_corrupt(self, tmp_path):
        empty = tmp_path / "e.csv"
        empty.write_text("dim0\n")
        with pytest.raises(UsageError):
            read_samples(empty)
        bad = tmp_path / "b.csv"
        bad.write_text("dim0\n1.0\nabc\n")
        with pytest.raises(UsageError):
            read_samples(bad)
        with pytest.raises(UsageError):
            read_samples(tmp_path / "missing.csv")


class TestRun:
    def test_outputs_and_summary(self, tmp_path, capsys):
        out = tmp_path / "o"
        assert run("run", "--target", "himmelblau", "--T", 0.3, "--dt", 0.01, "--K", 20, "--n", 30,
                   "--seed", 7, "--modes", "builtin", "--out", out) == 0
        summary = capsys.readouterr().out.splitlines()[0]
        assert summary.startswith("n=30 steps=30 f_evals=18000 grad_evals=6000")
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["f_evals"] == 30 * 20 * 30
        assert manifest["config"]["seed"] == 7 and manifest["config"]["dim"] == 2
        assert manifest["rng_scheme"] and manifest["version"]
        assert read_samples(out / "samples.csv").shape == (30, 2)
        report = json.loads((out / "modes.json").read_text())
        assert len(report["pdf_proportions"]) == 4

    def test_manifest_rerun_is_byte_identical(self, tmp_path, mixture_file):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run("run", "--target", "gauss-mix", "--mixture", mixture_file, "--T", 0.5, "--dt", 0.05,
                   "--K", 30, "--n", 40, "--seed", 3, "--out", a) == 0
        assert run("run", "--manifest", a / "manifest.json", "--out", b, "--threads", 4) == 0
        assert (a / "samples.csv").read_bytes() == (b / "samples.csv").read_bytes()

    def test_threads_do_not_change_file(self, tmp_path):
        paths = []
        for threads in (1, 8):
            out = tmp_path / f"t{threads}"
            assert run("run", "--target", "tanh1d", "--T", 0.3, "--dt", 0.02, "--K", 50, "--n", 100,
                       "--seed", 11, "--threads", threads, "--out", out) == 0
            paths.append(out / "samples.csv")
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_json_format(self, tmp_path):
        out = tmp_path / "j"
        assert run("run", "--target", "constant", "--dim", 2, "--T", 0.1, "--dt", 0.05, "--K", 3, "--n", 4,
                   "--format", "json", "--out", out) == 0
        assert read_samples(out / "samples.json").shape == (4, 2)

    def test_single_component_mixture_is_standard_normal(self, tmp_path):
        mix = tmp_path / "m.json"
        mix.write_text(json.dumps([{"mean": [0.0], "weight": 1.0}]))
        out = tmp_path / "s"
        assert run("run", "--target", "gauss-mix", "--mixture", mix, "--T", 2, "--dt", 0.01, "--K", 10,
                   "--n", 2000, "--seed", 5, "--out", out) == 0
        x = read_samples(out / "samples.csv")[:, 0]
        assert abs(x.mean()) < 0.1 and 0.85 < x.var(ddof=1) < 1.15

    def test_env_var_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MCSCORE_OUT", str(tmp_path / "env"))
        assert run("run", "--target", "tanh1d", "--T", 0.1, "--dt", 0.05, "--K", 2, "--n", 2) == 0
        assert (tmp_path / "env" / "samples.csv").exists()

    @pytest.mark.parametrize(
        "argv",
        [
            ["--T", -1, "--dt", 0.1, "--K", 2, "--n", 2],
            ["--T", 1, "--dt", 0, "--K", 2, "--n", 2],
            ["--T", 1, "--dt", 0.1, "--K", 0, "--n", 2],
            ["--T", 1, "--dt", 0.1, "--K", 2, "--n", 0],
            ["--dt", 0.1, "--K", 2, "--n", 2],
        ],
    )
    def test_usage_errors(self, tmp_path, argv, capsys):
        assert run("run", "--target", "tanh1d", "--out", tmp_path, *argv) == 2
        assert "error" in capsys.readouterr().err

    def test_unknown_target_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run("run", "--target", "rosenbrock", "--T", 1, "--dt", 0.1, "--K", 2, "--n", 2)
        assert exc.value.code == 2

    def test_mixture_required(self, tmp_path):
        assert run("run", "--target", "gauss-mix", "--T", 1, "--dt", 0.1, "--K", 2, "--n", 2, "--out", tmp_path) == 2

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert run("run", "--target", "tanh1d", "--T", 1, "--dt", 0.1, "--K", 2, "--n", 2, "--out", blocker / "sub") == 2


class TestProbe:
    def probe(self, capsys, *argv):
        assert run("probe", "--json", *argv) == 0
        return json.loads(capsys.readouterr().out)

    def test_constant_target(self, capsys):
        doc = self.probe(capsys, "--target", "constant", "--theta", "1.5", "--t", 0.3, "--K", 100, "--replicates", 50)
        assert doc["s2_mean"] == [-1.5] and doc["s2_stderr"] == [0.0]
        assert abs(doc["s1_mean"][0] + 1.5) < 4 * doc["s1_stderr"][0]
        assert doc["oracle"] == [-1.5]

    def test_mixture_symmetry(self, capsys, mixture_file):
        doc = self.probe(capsys, "--target", "gauss-mix", "--mixture", mixture_file, "--theta", "0",
                         "--t", 0.5, "--K", 2000, "--replicates", 100, "--seed", 4)
        assert doc["oracle"] == [0.0] and doc["oracle_source"] == "analytic"
        assert doc["dispatched"] == "S1"
        for key in ("s1", "s2"):
            assert abs(doc[f"{key}_mean"][0]) < 4 * doc[f"{key}_stderr"][0]

    def test_tanh_against_quadrature(self, capsys):
        doc = self.probe(capsys, "--target", "tanh1d", "--theta", "-5", "--t", 0.01, "--K", 2000,
                         "--replicates", 200, "--seed", 8)
        assert doc["oracle_source"] == "quadrature" and doc["dispatched"] == "S2"
        assert abs(doc["s2_mean"][0] - doc["oracle"][0]) < 4 * doc["s2_stderr"][0]

    def test_text_output(self, capsys):
        assert run("probe", "--target", "himmelblau", "--theta", "0,0", "--t", 1.0, "--K", 50, "--replicates", 5) == 0
        out = capsys.readouterr().out
        assert "oracle  n/a" in out and "dispatched" in out

    def test_bad_theta(self):
        assert run("probe", "--target", "himmelblau", "--theta", "1", "--t", 0.5) == 2
        assert run("probe", "--target", "tanh1d", "--theta", "x", "--t", 0.5) == 2
        assert run("probe", "--target", "tanh1d", "--theta", "0", "--t", 0.0) == 2


class TestHistogram:
    def test_all_zero_samples(self, tmp_path):
        samples = write_samples(tmp_path / "z.csv", np.zeros((1000, 1)))
        out = tmp_path / "h.csv"
        assert run("hist", "--samples", samples, "--bins", 10, "--range", -1, 1, "--output", out) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "bin_left,bin_right,bin_center,count,density"
        counts = [int(line.split(",")[3]) for line in lines[1:]]
        assert sorted(counts) == [0] * 9 + [1000]

    def test_overlay(self, tmp_path):
        samples = write_samples(tmp_path / "s.csv", np.random.default_rng(0).normal(size=(500, 1)))
        out = tmp_path / "h.csv"
        assert run("hist", "--samples", samples, "--bins", 8, "--target", "tanh1d", "--output", out) == 0
        header, *rows = out.read_text().splitlines()
        assert header.endswith(",true_density") and len(rows) == 8

    def test_empty_file(self, tmp_path):
        empty = tmp_path / "e.csv"
        empty.write_text("dim0\n")
        assert run("hist", "--samples", empty) == 2

    def test_missing_file(self, tmp_path):
        assert run("hist", "--samples", tmp_path / "nope.csv") == 2


def test_modes_subcommand(tmp_path, capsys):
    samples = write_samples(tmp_path / "s.csv", np.array([[3.0, 2.0], [3.1, 2.2], [-3.78, -3.28]]))
    assert run("modes", "--samples", samples, "--target", "himmelblau", "--pdf-samples", 500) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["counts"] == [2, 0, 1, 0]
    assert doc["sampled_proportions"] == pytest.approx([2 / 3, 0, 1 / 3, 0])


def test_custom_modes_file(tmp_path, capsys):
    modes = tmp_path / "modes.json"
    modes.write_text(json.dumps({"centers": [[-2.0], [2.0]], "half_width": 1.0}))
    samples = write_samples(tmp_path / "s.csv", np.array([[-3.1], [2.5], [1.5]]))
    assert run("modes", "--samples", samples, "--target", "constant", "--modes", modes) == 0
    assert json.loads(capsys.readouterr().out)["counts"] == [0, 2]
