"""Command-line harness: parsing, precedence, output formats, exit codes."""

import json

import pytest

from hestonmc.cli import CSV_HEADER, main, parse_config

FAST = ["--paths", "256", "--runs", "2", "--scheme", "exact",
        "--sampler", "sobol"]


def run_cli(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestParsing:
    def test_defaults_are_benchmark_parameters(self):
        _, manifest, _ = parse_config(["price"])
        p = manifest.params
        assert (p.kappa, p.theta, p.sigma, p.v0) == (6.21, 0.019, 0.61, 0.010201)
        assert p.r == 0.0319
        assert manifest.spec.strike == 100.0 and manifest.spec.spot == 100.0
        assert manifest.spec.maturity == 1.0

    def test_asian_dates_flag(self):
        _, manifest, _ = parse_config(
            ["price", "--product", "asian",
             "--averaging-times", "0.25,0.5,0.75,1"])
        assert manifest.spec.averaging_times == (0.25, 0.5, 0.75, 1.0)

    def test_flag_overrides_config_file(self, tmp_path):
        f = tmp_path / "cfg.txt"
        f.write_text("paths = 512\nseed = 9  # comment\n")
        _, manifest, _ = parse_config(
            ["price", "--config", str(f), "--paths", "128"])
        assert manifest.config.n_paths == 128
        assert manifest.config.seed == 9

    def test_unknown_config_key(self, tmp_path, capsys):
        f = tmp_path / "cfg.txt"
        f.write_text("bogus = 1\n")
        code, _, err = run_cli(capsys, ["price", "--config", str(f)])
        assert code == 2 and "bogus" in err


class TestExitCodes:
    def test_rho_out_of_range(self, capsys):
        code, _, err = run_cli(capsys, ["price", "--rho", "1.5"])
        assert code == 2 and "rho" in err

    def test_zero_paths(self, capsys):
        code, _, err = run_cli(capsys, ["price", "--paths", "0"])
        assert code == 2

    def test_sobol_discretised_without_ack(self, capsys):
        code, _, err = run_cli(capsys, ["price", "--scheme", "milstein",
                                        "--sampler", "sobol"])
        assert code == 2 and "sobol" in err.lower()

    def test_put_greeks_rejected(self, capsys):
        code, _, err = run_cli(capsys, ["greeks", "--right", "put"] + FAST)
        assert code == 2

    def test_success(self, capsys):
        code, out, _ = run_cli(capsys, ["price"] + FAST)
        assert code == 0 and "price" in out


class TestOutputFormats:
    def test_csv_round_trip(self, capsys):
        code, out, err = run_cli(capsys, ["price", "--format", "csv"] + FAST)
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == CSV_HEADER
        cells = dict(zip(lines[0].split(","), lines[1].split(",")))
        assert cells["scheme"] == "exact"
        assert cells["sampler"] == "sobol"
        assert int(cells["paths"]) == 256
        assert int(cells["runs"]) == 2
        float(cells["mean"]), float(cells["std"])  # parse cleanly
        manifest = json.loads(err.split("# manifest", 1)[1])
        assert manifest["n_paths"] == 256 and manifest["scheme"] == "exact"

    def test_csv_byte_identical_modulo_timing(self, capsys):
        _, out1, _ = run_cli(capsys, ["price", "--format", "csv"] + FAST)
        _, out2, _ = run_cli(capsys, ["price", "--format", "csv"] + FAST)
        strip = lambda text: [",".join(line.split(",")[:-1])
                              for line in text.strip().splitlines()]
        assert strip(out1) == strip(out2)

    def test_jsonl_rows_carry_manifest(self, capsys):
        code, out, _ = run_cli(capsys, ["greeks", "--format", "jsonl"] + FAST)
        assert code == 0
        rows = [json.loads(line) for line in out.strip().splitlines()]
        assert {r["quantity"] for r in rows} == {"price", "delta", "rho"}
        for r in rows:
            assert r["kappa"] == 6.21 and r["n_paths"] == 256
            assert "mean" in r and "std" in r

    def test_table_format(self, capsys):
        code, out, _ = run_cli(capsys, ["greeks"] + FAST)
        assert code == 0
        assert out.startswith("# manifest")
        assert "delta" in out and "rho" in out


class TestBench:
    def test_sweep_rows(self, capsys):
        code, out, _ = run_cli(capsys, [
            "bench", "--scheme", "milstein", "--paths", "1000",
            "--steps", "8,16", "--runs", "2"])
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 3
        assert lines[1].split(",")[3] == "8"
        assert lines[2].split(",")[3] == "16"

    def test_single_cell_matches_price(self, capsys):
        args = FAST + ["--seed", "5"]
        _, bench_out, _ = run_cli(capsys, ["bench"] + args)
        _, price_out, _ = run_cli(capsys, ["price", "--format", "csv"] + args)
        b = bench_out.strip().splitlines()[1].split(",")[:-1]
        p = price_out.strip().splitlines()[1].split(",")[:-1]
        assert b == p

    def test_emit_points(self, capsys, tmp_path):
        f = tmp_path / "points.csv"
        code, _, _ = run_cli(capsys, [
            "bench", "--scheme", "exact", "--sampler", "sobol",
            "--paths", "64", "--runs", "1", "--emit-points", str(f)])
        assert code == 0
        lines = f.read_text().strip().splitlines()
        assert lines[0] == "sampler,x,y"
        kinds = {line.split(",")[0] for line in lines[1:]}
        assert kinds == {"pseudo", "sobol"}
        for line in lines[1:]:
            _, x, y = line.split(",")
            assert 0.0 <= float(x) < 1.0 and 0.0 <= float(y) < 1.0
