import csv
import json
import textwrap

import pytest

from metastates import ValidationError
from metastates.cli import main
from metastates.config import RunConfig, apply_override, dump_config, parse_config

POTTS = textwrap.dedent("""
    [model]
    family = quadratic-potts
    q = 3
    beta = 2.804624500372609
    B = 0.3

    [weights]
    samples = 100000

    [scan]
    lower = 2.7
    upper = 3.0
""")

ISING = textwrap.dedent("""
    [model]
    family = quadratic-ising
    beta = {beta}
    fields = {fields}

    [weights]
    samples = 100000

    [simulate]
    n = 30, 60
    samples = 8

    [scan]
    axis = field
    lower = 0.5
    upper = 1.2
""")


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# configuration


def test_config_round_trip():
    cfg = parse_config(POTTS)
    again = parse_config(dump_config(cfg))
    assert again == cfg
    assert dump_config(RunConfig()) == dump_config(parse_config(dump_config(RunConfig())))


def test_config_rejects_unknown_and_malformed():
    for text in ("[model]\nfamly = x\n", "[modle]\n", "[model]\nbeta = abc\n",
                 "[model]\nfamily = heisenberg\n", "[solver]\nrandom_starts = 2.5\n",
                 "[model]\nfamily = quadratic-ising\nfields = 0.1, 0.2\npi = 1\n"):
        with pytest.raises(ValidationError):
            parse_config(text)


def test_overrides():
    cfg = RunConfig()
    apply_override(cfg, "model.fields=0.5,-0.5")
    apply_override(cfg, "simulate.epsilon=0.2")
    assert cfg.model.fields == [0.5, -0.5] and cfg.simulate.epsilon == 0.2
    apply_override(cfg, "simulate.epsilon=none")
    assert cfg.simulate.epsilon is None
    for bad in ("model.beta", "beta=1", "model.nope=1"):
        with pytest.raises(ValidationError):
            apply_override(cfg, bad)


# commands


def test_solve_examples(tmp_path, capsys):
    cfg = write(tmp_path, ISING.format(beta=0.5, fields="0.0"))
    assert main(["solve", cfg, "--out", str(tmp_path / "a")]) == 0
    out = rows(tmp_path / "a" / "minimizers.csv")
    assert len(out) == 1 and float(out[0]["nu[+]"]) == pytest.approx(0.5, abs=1e-12)

    cfg = write(tmp_path, ISING.format(beta=2.0, fields="0.0"))
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    out = rows(tmp_path / "b" / "minimizers.csv")
    ms = sorted(2 * float(r["nu[+]"]) - 1 for r in out)
    assert ms == pytest.approx([-0.9575, 0.9575], abs=1e-4)

    cfg = write(tmp_path, POTTS)
    assert main(["solve", cfg, "--out", str(tmp_path / "c")]) == 0
    out = rows(tmp_path / "c" / "minimizers.csv")
    phis = [float(r["phi"]) for r in out]
    assert len(out) == 4 and max(phis) - min(phis) < 1e-4
    assert "4 global" in capsys.readouterr().out


def test_metastate_outputs(tmp_path):
    cfg = write(tmp_path, POTTS)
    assert main(["metastate", cfg, "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    weights = sorted(s["weight"] for s in report["states"])
    assert weights[0] == 0.0
    assert all(abs(w - 1 / 3) < 0.01 for w in weights[1:])
    table = rows(tmp_path / "weights.csv")
    assert sum(int(r["visible"]) for r in table) == 3
    assert (tmp_path / "summary.txt").read_text().startswith("interaction:")


def test_metastate_two_phase(tmp_path):
    cfg = write(tmp_path, ISING.format(beta=2.0, fields="0.5, -0.5"))
    assert main(["metastate", cfg, "--out", str(tmp_path)]) == 0
    table = rows(tmp_path / "weights.csv")
    assert [float(r["exact_weight"]) for r in table] == [0.5, 0.5]
    assert all(abs(float(r["weight"]) - 0.5) < 0.01 for r in table)


def test_scan_commands(tmp_path):
    cfg = write(tmp_path, POTTS)
    assert main(["scan", cfg, "--out", str(tmp_path / "p")]) == 0
    beta = float(rows(tmp_path / "p" / "scan.csv")[0]["coexistence"])
    assert abs(beta - 2.8046245) < 1e-5
    cfg = write(tmp_path, ISING.format(beta=2.0, fields="0.5, -0.5"))
    assert main(["scan", cfg, "--out", str(tmp_path / "i")]) == 0
    h = float(rows(tmp_path / "i" / "scan.csv")[0]["coexistence"])
    assert abs(h - 0.94107) < 1e-4


def test_simulate_and_plotdata(tmp_path):
    cfg = write(tmp_path, ISING.format(beta=2.0, fields="0.5, -0.5"))
    assert main(["simulate", cfg, "--out", str(tmp_path)]) == 0
    table = rows(tmp_path / "simulate.csv")
    for n in ("30", "60"):
        total = sum(float(r["frequency"]) for r in table if r["n"] == n)
        assert total == pytest.approx(1.0, abs=1e-12)
    assert len(rows(tmp_path / "simulate_draws.csv")) == 16
    cfg = write(tmp_path, POTTS, "potts.ini")
    assert main(["plotdata", cfg, "--out", str(tmp_path)]) == 0
    kinds = [r["kind"] for r in rows(tmp_path / "phi_curve.csv")]
    assert kinds.count("curve") == 400 and kinds.count("minimum") == 2


@pytest.mark.parametrize("command", ["solve", "metastate", "scan", "simulate", "plotdata"])
def test_outputs_are_byte_identical(tmp_path, command):
    text = POTTS if command in ("metastate", "scan", "plotdata") else \
        ISING.format(beta=2.0, fields="0.5, -0.5")
    cfg = write(tmp_path, text)
    assert main([command, cfg, "--seed", "11", "--out", str(tmp_path / "a")]) == 0
    assert main([command, cfg, "--seed", "11", "--workers", "3", "--out",
                 str(tmp_path / "b")]) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_dump_config_round_trip(tmp_path, capsys):
    cfg = write(tmp_path, POTTS)
    assert main(["solve", cfg, "--seed", "5", "--set", "solver.random_starts=12",
                 "--dump-config"]) == 0
    dumped = capsys.readouterr().out
    parsed = parse_config(dumped)
    assert parsed.solver.random_starts == 12 and parsed.weights.seed == 5
    path = write(tmp_path, dumped, "dumped.ini")
    assert main(["solve", path, "--dump-config"]) == 0
    assert capsys.readouterr().out == dumped


def test_exit_codes(tmp_path, capsys):
    assert main(["solve", "--set", "model.family=bogus"]) == 2
    assert main(["solve", str(tmp_path / "missing.ini")]) == 2
    assert main(["solve", "--set", "model.beta=1.0", "--set", "model.fields=0"]) == 3
    assert main(["metastate", "--set", "model.beta=2.0", "--set", "model.fields=0",
                 "--out", str(tmp_path)]) == 3
    cfg = write(tmp_path, ISING.format(beta=2.0, fields="0.5, -0.5"))
    assert main(["simulate", cfg, "--set", "simulate.budget=10", "--out", str(tmp_path)]) == 4
    assert main(["solve", cfg, "--set", "solver.max_iterations=0", "--set",
                 "solver.newton_steps=0", "--set", "solver.random_starts=3",
                 "--out", str(tmp_path)]) == 5
    err = capsys.readouterr().err
    for word in ("invalid input", "non-degeneracy", "budget", "did not converge"):
        assert word in err
