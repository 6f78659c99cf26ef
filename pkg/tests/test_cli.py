import csv

import numpy as np
import pytest

from sobmor import io
from sobmor.cli import UsageError, main, parse_orders
from sobmor.metrics import solve_count
from sobmor.models import check_structure

FAST = ["--grid-count", "40", "--verify-factor", "2", "--gamma-count", "5", "--gamma-lo", "1e-4", "--max-iters", "200"]


def test_reduce_writes_outputs(tmp_path):
    out = tmp_path / "run"
    code = main(["reduce", "--model", "msd", "--cells", "3", "--r", "2", "--out", str(out), *FAST])
    assert code == 0
    rom = io.read_model(out / "rom.manifest")
    check_structure(rom)
    assert rom.order == 2
    rows = list(csv.reader(open(out / "error_curve.csv")))
    assert rows[0] == ["omega", "sigma_max_error"] and len(rows) == 1 + 87
    summary, levels = io.read_report(out / "report.txt")
    assert summary["method"] == "sobmor" and levels


def test_reduce_is_reproducible(tmp_path):
    args = ["reduce", "--model", "triple-chain", "--cells", "2", "--r", "2", *FAST]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    for name in ("error_curve.csv", "rom_M.txt", "rom_B.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.mark.filterwarnings("ignore:pH-IRKA did not converge")
@pytest.mark.parametrize("method", ["bt", "ph-bt", "ph-irka"])
def test_reduce_baselines(tmp_path, method):
    out = tmp_path / method
    assert main(["reduce", "--model", "msd", "--cells", "4", "--r", "3", "--method", method, "--out", str(out), *FAST]) == 0
    assert (out / "rom.manifest").exists()


def test_structure_mismatch_is_usage_error(tmp_path, capsys):
    code = main(["reduce", "--model", "msd", "--cells", "3", "--r", "2", "--method", "so-bt", "--out", str(tmp_path)])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_usage_errors(tmp_path):
    assert main(["reduce", "--model", "msd", "--r", "2", "--out", str(tmp_path)]) == 1
    assert main(["reduce", "--model", "msd", "--cells", "3", "--out", str(tmp_path)]) == 1
    assert main(["reduce", "--model", "msd", "--cells", "3", "--r", "99", "--out", str(tmp_path)]) == 1
    with pytest.raises(SystemExit) as err:
        main(["reduce", "--model", "nope"])
    assert err.value.code == 1


@pytest.mark.filterwarnings("ignore:pH-IRKA did not converge")
def test_compare_rows(tmp_path):
    out = tmp_path / "cmp"
    code = main(
        ["compare", "--model", "msd", "--cells", "4", "--r", "2:4:2", "--methods", "sobmor,ph-bt,ph-irka", "--out", str(out), *FAST]
    )
    assert code == 0
    rows = list(csv.DictReader(open(out / "compare.csv")))
    assert len(rows) == 6
    assert {(int(r["r"]), r["method"]) for r in rows} == {(r, m) for r in (2, 4) for m in ("sobmor", "ph-bt", "ph-irka")}
    assert all(float(r["hinf_estimate"]) >= 0 for r in rows)
    assert len(list((out / "roms").glob("*.manifest"))) == 6


def test_sample_and_reuse(tmp_path):
    path = tmp_path / "s.txt"
    args = ["sample", "--model", "msd", "--cells", "3", "--grid-count", "30", "--out", str(path)]
    assert main(args) == 0
    s = io.read_samples(path)
    assert len(s) == 37
    stamp = path.stat().st_mtime_ns
    before = solve_count()
    assert main(args) == 0
    assert solve_count() == before and path.stat().st_mtime_ns == stamp


def test_samples_feed_reduce(tmp_path):
    path = tmp_path / "s.txt"
    assert main(["sample", "--model", "msd", "--cells", "3", "--grid-count", "40", "--out", str(path)]) == 0
    code = main(["reduce", "--model", "msd", "--cells", "3", "--r", "2", "--samples", str(path), "--out", str(tmp_path / "o"), *FAST])
    assert code == 0
    bad = ["reduce", "--model", "msd", "--cells", "3", "--r", "2", "--samples", str(path), "--out", str(tmp_path / "o")]
    assert main([*bad, "--grid-count", "50"]) == 1


def test_malformed_samples_exit(tmp_path, capsys):
    path = tmp_path / "s.txt"
    path.write_text("samples 1 2 2\nomega 0\n1 0 0 0\n")
    code = main(["reduce", "--model", "msd", "--cells", "3", "--r", "2", "--samples", str(path), "--out", str(tmp_path)])
    assert code == 1
    assert "s.txt:" in capsys.readouterr().err


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("model = msd\ncells = 3\nr = 3\nmethod = ph-bt\ngrid_count = 40\nverify_factor = 2\n")
    out = tmp_path / "o"
    assert main(["reduce", "--config", str(cfg), "--r", "2", "--out", str(out)]) == 0
    summary, _ = io.read_report(out / "report.txt")
    assert summary["r"] == "2" and summary["method"] == "ph-bt"
    cfg.write_text("colour = red\n")
    assert main(["reduce", "--config", str(cfg), "--out", str(out)]) == 1


def test_manifest_source(tmp_path):
    from sobmor.benchmarks import msd_ph_chain

    manifest = io.write_model(msd_ph_chain(3), tmp_path / "fom", "fom")
    out = tmp_path / "o"
    assert main(["reduce", "--manifest", str(manifest), "--r", "2", "--method", "ph-bt", "--out", str(out), *FAST]) == 0
    assert main(["reduce", "--manifest", str(manifest), "--model", "msd", "--cells", "3", "--r", "2", "--out", str(out)]) == 1


def test_parse_orders():
    assert parse_orders("8") == [8]
    assert parse_orders("4,6,8") == [4, 6, 8]
    assert parse_orders("4:10:3") == [4, 7, 10]
    for bad in ("a", "0", "4:8:0", "1:2:3:4"):
        with pytest.raises(UsageError):
            parse_orders(bad)


def test_numerical_failure_exit(tmp_path):
    # singular mass matrix: SO-BT cannot build the explicit embedding
    from sobmor.models import SSOModel

    fom = SSOModel(np.diag([1.0, 0.0]), np.eye(2), np.eye(2), np.eye(2))
    manifest = io.write_model(fom, tmp_path / "fom", "fom")
    assert main(["reduce", "--manifest", str(manifest), "--r", "1", "--method", "so-bt", "--out", str(tmp_path / "o")]) == 2
