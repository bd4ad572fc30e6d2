"""Tests for the command-line interface."""

import numpy as np
import pytest

from bregopt import Trace, load_instance
from bregopt.cli import main


def strip_wall(text):
    return [line.rsplit(",", 1)[0] for line in text.splitlines()]


class TestGen:
    def test_interpolation_instance_and_manifest(self, tmp_path):
        out = str(tmp_path / "inst.bin")
        code = main(["gen", "interpolation", "--n", "30", "--d", "6",
                     "--seed", "2", "-o", out])
        assert code == 0
        problem = load_instance(out)
        assert problem.objective.dim == 6
        text = open(out + ".manifest").read()
        assert "n = 30" in text
        assert "d = 6" in text

    def test_tomography_manifest_dimensions(self, tmp_path):
        out = str(tmp_path / "tomo.bin")
        code = main(["gen", "tomography", "--size", "64", "--angles", "60",
                     "--seed", "1", "-o", out])
        assert code == 0
        text = open(out + ".manifest").read()
        assert "d = 4096" in text
        assert "n = 3840" in text

    def test_unknown_generator_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            main(["gen", "nonsense", "-o", str(tmp_path / "x.bin")])
        assert info.value.code == 2


class TestRun:
    def gen_instance(self, tmp_path):
        out = str(tmp_path / "inst.bin")
        main(["gen", "interpolation", "--n", "20", "--d", "5", "--seed", "0",
              "-o", out])
        return out

    def test_zero_budget_writes_header_and_one_record(self, tmp_path):
        inst = self.gen_instance(tmp_path)
        trace_path = str(tmp_path / "trace.csv")
        code = main(["run", "--instance", inst, "--method", "bsgd",
                     "--eta", "0.01", "--epochs", "0", "-o", trace_path])
        assert code == 0
        lines = open(trace_path).read().splitlines()
        assert len(lines) == 2
        assert lines[0].startswith("iter,")

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "[problem]\ngenerator = interpolation\nn = 20\nd = 5\nseed = 0\n"
            "[solver]\nmethod = bsgd\neta = 0.01\nepochs = 2\nseed = 1\n"
            f"[output]\ntrace = {tmp_path / 'a.csv'}\n"
        )
        assert main(["run", "-c", str(cfg)]) == 0
        assert main(["run", "-c", str(cfg), "--eta", "0.005",
                     "-o", str(tmp_path / "b.csv")]) == 0
        a = Trace.from_csv(str(tmp_path / "a.csv"))
        b = Trace.from_csv(str(tmp_path / "b.csv"))
        assert a.final.eta == pytest.approx(0.01)
        assert b.final.eta == pytest.approx(0.005)

    def test_unknown_config_key_is_usage_error(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("[solver]\nstride = 3\n")
        assert main(["run", "-c", str(cfg)]) == 2

    def test_missing_config_file_is_io_error(self, tmp_path):
        assert main(["run", "-c", str(tmp_path / "absent.cfg")]) == 3

    def test_missing_instance_file_is_io_error(self, tmp_path):
        assert main(["run", "--instance", str(tmp_path / "absent.bin"),
                     "--method", "bsgd", "--eta", "0.01"]) == 3

    def test_step_failure_keeps_partial_trace(self, tmp_path):
        inst = self.gen_instance(tmp_path)
        trace_path = str(tmp_path / "partial.csv")
        code = main(["run", "--instance", inst, "--method", "bsgd",
                     "--eta", "1e12", "--epochs", "2", "-o", trace_path])
        assert code == 4
        lines = open(trace_path).read().splitlines()
        assert len(lines) >= 2

    def test_determinism_modulo_wall_clock(self, tmp_path):
        inst = self.gen_instance(tmp_path)
        a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        args = ["run", "--instance", inst, "--method", "bsaga", "--eta", "0.02",
                "--epochs", "2", "--seed", "9"]
        assert main(args + ["-o", a]) == 0
        assert main(args + ["-o", b]) == 0
        assert strip_wall(open(a).read()) == strip_wall(open(b).read())


class TestVerify:
    def test_quick_battery_passes(self, capsys):
        code = main(["verify", "--quick", "--samples", "40"])
        out = capsys.readouterr().out
        assert code == 0
        assert "ALL CHECKS PASSED" in out

    def test_negative_control_fails(self, tmp_path):
        report = str(tmp_path / "report.txt")
        code = main(["verify", "--quick", "--samples", "40",
                     "--negative-control", "--report", report])
        assert code == 1
        assert "FAIL" in open(report).read()

    def test_thread_pool_matches_serial(self, capsys, monkeypatch):
        main(["verify", "--quick", "--samples", "40"])
        serial = capsys.readouterr().out
        monkeypatch.setenv("BREGOPT_THREADS", "3")
        main(["verify", "--quick", "--samples", "40"])
        threaded = capsys.readouterr().out
        drop_runtime = lambda text: [
            line for line in text.splitlines() if "runtime" not in line
        ]
        assert drop_runtime(serial) == drop_runtime(threaded)
