import json
import subprocess
import sys

import numpy as np
import pytest

from dpolymer import cli, lattice


def run_cli(args):
    return cli.cli_main(args)


class TestParsing:
    def test_missing_model_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run_cli(["scaling"])
        assert exc.value.code == 2
        assert "--model" in capsys.readouterr().err

    def test_unknown_model_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            run_cli(["scaling", "--model", "zz"])
        assert exc.value.code == 2

    def test_no_command_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            run_cli([])
        assert exc.value.code == 2


class TestSubcommands:
    def test_scaling_writes_csv(self, tmp_path, capsys):
        out = str(tmp_path / "run")
        code = run_cli([
            "scaling", "--model", "b", "--N", "12,16,20", "--replicas", "120",
            "--seed", "3", "--out", out, "--format", "csv",
        ])
        assert code == 0
        text = (tmp_path / "run.moments.csv").read_text()
        assert text.startswith("model,N,m,n,p,moment,stderr,replicas,seed")
        assert "slope" in capsys.readouterr().out

    def test_scaling_json(self, tmp_path):
        out = str(tmp_path / "run")
        code = run_cli([
            "scaling", "--model", "ig", "--N", "12,16,20", "--replicas", "100",
            "--seed", "3", "--out", out, "--format", "json",
        ])
        assert code == 0
        data = json.loads((tmp_path / "run.json").read_text())
        assert data["model"] == "ig" and "fits" in data

    def test_exit_times(self, tmp_path):
        out = str(tmp_path / "exits.csv")
        code = run_cli([
            "exit-times", "--model", "ig", "--N", "6", "--replicas", "5",
            "--seed", "2", "--out", out,
        ])
        assert code == 0
        rows = [line.split(",") for line in open(out).read().strip().splitlines()[1:]]
        for rep in range(5):
            # exhaustive first-step dichotomy: the l >= 1 atoms of both axes tile
            # the path space
            mass = sum(float(r[3]) for r in rows if int(r[0]) == rep and r[2] != "0")
            assert mass == pytest.approx(1.0, abs=1e-9)

    def test_dump_env_roundtrip(self, tmp_path):
        out = str(tmp_path / "env.npz")
        code = run_cli(["dump-env", "--model", "g", "--N", "4", "--seed", "8", "--out", out])
        assert code == 0
        env = lattice.load_environment(out)
        spec = lattice.make_model("g", 1.0, 0.5)
        m, n = lattice.characteristic_shape(spec, 4)
        ref = lattice.sample_environment(spec, m, n, 8)
        assert np.array_equal(env.south, ref.south)
        assert np.array_equal(env.logy1, ref.logy1)

    def test_verify_fast_passes(self, capsys):
        code = run_cli(["verify", "--model", "ig", "--mu", "2", "--theta", "1",
                        "--seed", "7", "--fast"])
        out = capsys.readouterr().out
        assert code == 0, out
        assert "[FAIL]" not in out and "[PASS]" in out

    def test_entry_point_subprocess(self):
        proc = subprocess.run(
            [sys.executable, "-m", "dpolymer.cli", "dump-env", "--model", "ig",
             "--N", "3", "--out", "/tmp/_cli_env_test.npz"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
