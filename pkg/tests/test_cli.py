"""CLI surface tests: run, audit, dump commands, exit codes."""

from histchain.cli import main


class TestRun:
    def test_clean_run_exit_zero(self, tmp_path, capsys):
        code = main(["run", "--minutes", "2", "--seed", "42",
                     "--out", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "events.log").exists()
        assert (tmp_path / "chain.txt").exists()
        assert (tmp_path / "historian6.txt").exists()
        assert "chain length 3" in capsys.readouterr().out

    def test_invalid_replication_factor_usage_error(self, tmp_path, capsys):
        code = main(["run", "--replication-factor", "7", "--nodes", "6",
                     "--out", str(tmp_path)])
        assert code == 2
        assert "usage error" in capsys.readouterr().err

    def test_scenario_run_exit_zero(self, tmp_path, capsys):
        code = main(["run", "--scenario", "A", "--out", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "scenario_report.txt").exists()
        out = capsys.readouterr().out
        assert "scenario A_historian_tamper: PASS" in out

    def test_config_file(self, tmp_path):
        config = tmp_path / "run.conf"
        config.write_text("seed=5\ncapacity=12\n")
        code = main(["run", "--minutes", "1", "--config", str(config),
                     "--out", str(tmp_path / "arts")])
        assert code == 0

    def test_bad_config_file(self, tmp_path, capsys):
        config = tmp_path / "run.conf"
        config.write_text("who=knows\n")
        code = main(["run", "--config", str(config), "--out", str(tmp_path)])
        assert code == 2

    def test_trace_wire_writes_transcript(self, tmp_path):
        code = main(["run", "--minutes", "1", "--trace-wire",
                     "--out", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "wire_trace.txt").read_text().strip()


class TestAudit:
    def test_clean_artifacts_exit_zero(self, tmp_path, capsys):
        main(["run", "--minutes", "2", "--out", str(tmp_path)])
        capsys.readouterr()
        code = main(["audit", str(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert out.startswith("chain|valid")
        assert "0 flagged" in out

    def test_tampered_artifact_exit_one(self, tmp_path, capsys):
        main(["run", "--minutes", "2", "--out", str(tmp_path)])
        hist = tmp_path / "historian1.txt"
        lines = hist.read_text().splitlines()
        name, minute, values = lines[0].split("|")
        lines[0] = f"{name}|{minute}|1{values}"
        hist.write_text("\n".join(lines) + "\n")
        code = main(["audit", str(tmp_path)])
        assert code == 1

    def test_missing_artifacts_usage_error(self, tmp_path, capsys):
        code = main(["audit", str(tmp_path / "nowhere")])
        assert code == 2


class TestDumps:
    def test_dump_chain_prints_dump(self, tmp_path, capsys):
        main(["run", "--minutes", "1", "--out", str(tmp_path)])
        capsys.readouterr()
        code = main(["dump-chain", str(tmp_path)])
        assert code == 0
        assert capsys.readouterr().out.startswith("block|0|")

    def test_dump_historian_prints_records(self, tmp_path, capsys):
        main(["run", "--minutes", "1", "--out", str(tmp_path)])
        capsys.readouterr()
        code = main(["dump-historian", "1", str(tmp_path)])
        assert code == 0
        assert "Sensor 1|" in capsys.readouterr().out

    def test_dump_missing_node_usage_error(self, tmp_path, capsys):
        main(["run", "--minutes", "1", "--out", str(tmp_path)])
        code = main(["dump-historian", "9", str(tmp_path)])
        assert code == 2
