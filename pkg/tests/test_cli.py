import csv
import math
from pathlib import Path

import pytest

from voltarget.cli import (
    HEADERS, cmd_lln_clt, cmd_multipliers, cmd_price_convergence, cmd_vega, cmd_vol_convergence,
    main,
)
from voltarget.config import ConfigError, parse_config, parse_curve, parse_number_list
from voltarget.engine import SMA, Capped

REPO = Path(__file__).resolve().parents[1]

SMALL = """
[market]
T = 1.0
r = 0.05
rho = 0.03
sigma = 0.5

[index]
lambdas = 0.9
target_vol = 0.2
v0 = 0.02

[simulation]
N = 50
paths = 300
seed = 7
threads = 1

[options]
strike = 1.0
bump = 0.001
grid_points = 64

[lln_clt]
lln_N = 2000
lln_paths = 3
clt_N = 200
clt_paths = 100
"""


def write(tmp_path, text, name="exp.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# ---------------------------------------------------------------------------
# config parsing


def test_number_list_forms():
    assert parse_number_list("0.8, 0.9") == [0.8, 0.9]
    grid = parse_number_list("0.71:0.99:0.01")
    assert len(grid) == 29 and grid[0] == 0.71 and grid[-1] == 0.99
    with pytest.raises(ConfigError):
        parse_number_list("0.9:0.1:0.1")
    with pytest.raises(ConfigError):
        parse_number_list("abc")


def test_curve_forms():
    assert parse_curve("0.05", 1.0).is_constant
    c = parse_curve("0:0.05, 0.5:0.04", 1.0)
    assert c(0.75) == 0.04
    with pytest.raises(ConfigError):
        parse_curve("0.2:0.05", 1.0)


def test_reference_config_loads():
    cfg = parse_config((REPO / "configs" / "reference.ini").read_text())
    assert cfg.lambdas == [0.8, 0.85, 0.9, 0.95]
    assert cfg.Ns == [1000, 2000, 5000]
    assert len(cfg.multiplier_lambdas) == 29
    assert cfg.market.discount_factor() == pytest.approx(math.exp(-0.05))


def test_variants_parse():
    cfg = parse_config(SMALL.replace("v0 = 0.02", "v0 = 0.02\nvariant = sma\nsma_window = 20"))
    assert cfg.variant == SMA(20)
    cfg = parse_config(SMALL.replace(
        "v0 = 0.02", "v0 = 0.02\nvariant = capped\nlam1 = 0.9\nlam2 = 0.95\nw_max = 1.5"))
    assert cfg.variant == Capped(0.9, 0.95, 1.5)


@pytest.mark.parametrize("bad", [
    SMALL.replace("lambdas = 0.9", "lambdas = 0.9, 1.0"),
    SMALL.replace("lambdas = 0.9", "lambda = 0.9"),
    SMALL.replace("N = 50", "N = "),
    SMALL.replace("paths = 300", "paths = 0"),
    SMALL.replace("[lln_clt]", "[extras]"),
    SMALL.replace("T = 1.0", ""),
    SMALL.replace("v0 = 0.02", "v0 = 0.02\nvariant = garch"),
])
def test_bad_configs_rejected(bad):
    with pytest.raises(ConfigError):
        parse_config(bad)


# ---------------------------------------------------------------------------
# commands


def test_multipliers_grid_rows():
    cfg = parse_config(SMALL + "\n[multipliers]\nlambdas = 0.71:0.99:0.01\n")
    header, rows = cmd_multipliers(cfg)
    assert header == HEADERS["multipliers"]
    assert len(rows) == 29
    for lam, u, ulo, uhi, v, vlo, vhi in rows:
        assert ulo <= u <= uhi and vlo <= v <= vhi


def test_multipliers_single_row():
    header, rows = cmd_multipliers(parse_config(SMALL))
    assert len(rows) == 1 and rows[0][0] == 0.9


def test_out_of_range_lambda_exits_with_error(tmp_path, capsys):
    cfg = write(tmp_path, SMALL + "\n[multipliers]\nlambdas = 0.5, 1.0\n")
    assert main(["multipliers", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "lambda" in capsys.readouterr().err


def test_vol_convergence_rows():
    cfg = parse_config(SMALL.replace("N = 50", "N = 20, 40").replace(
        "lambdas = 0.9", "lambdas = 0.8, 0.9"))
    header, rows = cmd_vol_convergence(cfg)
    assert [(r[0], r[1]) for r in rows] == [(0.8, 20), (0.8, 40), (0.9, 20), (0.9, 40)]
    assert all(r[2] > 0 for r in rows)


def test_price_tiny_strike_is_discounted_forward():
    cfg = parse_config(SMALL.replace("strike = 1.0", "strike = 1e-9"))
    _, rows = cmd_price_convergence(cfg)
    lam, N, mc, se, limit = rows[0]
    # both columns collapse to discounted expectations of the index level
    assert limit == pytest.approx(math.exp(-0.05) * math.exp(
        0.05 + (0.03 - 0.05) * 0.4 * cfg_u(0.9)), rel=1e-6)
    assert abs(mc - limit) < 5 * se + 0.02


def cfg_u(lam):
    from voltarget.multipliers import compute_U
    return compute_U(lam)[0]


def test_vega_vanishes_without_carry():
    cfg = parse_config(SMALL.replace("rho = 0.03", "rho = 0.05"))
    _, rows = cmd_vega(cfg)
    assert rows[0][4] == 0.0


def test_lln_clt_header_stable():
    header, rows = cmd_lln_clt(parse_config(SMALL))
    assert header[:4] == ["lambda", "lln_N", "lln_paths", "U_emp"]
    assert len(rows[0]) == len(header)


@pytest.mark.parametrize("command", list(HEADERS))
def test_every_command_writes_csv_with_header(tmp_path, command):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "out"
    assert main([command, "--config", cfg, "--out", str(out)]) == 0
    rows = read_csv(out / f"{command}.csv")
    assert rows[0] == HEADERS[command]
    assert len(rows) > 1


def test_density_small_sample_runs(tmp_path):
    cfg = write(tmp_path, SMALL.replace("paths = 300", "paths = 10"))
    assert main(["density", "--config", cfg, "--out", str(tmp_path), "--bins", "5",
                 "--bandwidth", "0.05"]) == 0
    rows = read_csv(tmp_path / "density.csv")
    assert len(rows) == 65


def test_output_bytes_independent_of_threads_and_reruns(tmp_path):
    cfg = write(tmp_path, SMALL.replace("paths = 300", "paths = 2500"))
    blobs = []
    for i, threads in enumerate(["1", "4", "4"]):
        out = tmp_path / f"run{i}"
        assert main(["density", "--config", cfg, "--out", str(out), "--threads", threads]) == 0
        blobs.append((out / "density.csv").read_bytes())
    assert blobs[0] == blobs[1] == blobs[2]


def test_seed_flag_changes_output(tmp_path):
    cfg = write(tmp_path, SMALL)
    main(["vol-convergence", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["vol-convergence", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "8"])
    assert (tmp_path / "a" / "vol-convergence.csv").read_bytes() != (
        tmp_path / "b" / "vol-convergence.csv").read_bytes()
