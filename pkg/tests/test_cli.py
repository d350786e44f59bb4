import csv
import json

import pytest

from hhpim.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK, EXIT_VERIFY, main


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def header_meta(path):
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            k, _, v = line[1:].partition(":")
            meta[k.strip()] = v.strip()
    return meta


@pytest.fixture(scope="module")
def compare_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cmp")
    assert main(["compare", "--out", str(out), "--slices", "20", "--seed", "11"]) == EXIT_OK
    return out


def test_compare_schema(compare_dir):
    rows = read_csv(compare_dir / "savings.csv")
    assert len(rows) == 6 * 3
    assert {r["baseline"] for r in rows} == {"Baseline-PIM", "Hetero-PIM", "Hybrid-PIM"}
    assert {r["scenario"] for r in rows} == {f"case{i}" for i in range(1, 7)}
    meta = header_meta(compare_dir / "savings.csv")
    assert meta["seed"] == "11" and len(meta["config_hash"]) == 12


def test_totals_match_traces(compare_dir):
    traces = read_csv(compare_dir / "traces.csv")
    summary = json.loads((compare_dir / "summary.json").read_text())
    sums = {}
    for r in traces:
        key = f"EfficientNet-B0/{r['scenario']}/{r['arch']}"
        sums[key] = sums.get(key, 0.0) + float(r["E_total_pJ"])
    assert set(sums) == set(summary["totals"])
    for key, total in sums.items():
        assert total == pytest.approx(summary["totals"][key]["E_total_pJ"], rel=1e-8)
    for r in traces:
        parts = float(r["E_mig_pJ"]) + float(r["E_dyn_pJ"]) + float(r["E_stat_pJ"])
        assert parts == pytest.approx(float(r["E_total_pJ"]), rel=1e-8)


def test_trace_columns(compare_dir):
    with open(compare_dir / "traces.csv") as fh:
        head = [l for l in fh if not l.startswith("#")][0].strip().split(",")
    for col in ("slice_idx", "arch", "scenario", "N", "t_constraint_ns", "x_HP-MRAM",
                "x_LP-SRAM", "E_mig_pJ", "E_dyn_pJ", "E_stat_pJ", "miss_flag"):
        assert col in head


def test_compare_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["compare", "--slices", "10", "--scenario", "case6", "--seed", "3"]
    assert main(args + ["--out", str(a)]) == EXIT_OK
    assert main(args + ["--out", str(b)]) == EXIT_OK
    for name in ("traces.csv", "savings.csv", "summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_self_comparison_row(tmp_path):
    assert main(["compare", "--arch", "hhpim", "--arch", "hhpim", "--slices", "5",
                 "--scenario", "case1", "--out", str(tmp_path)]) == EXIT_OK
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["savings_%"] == {}  # the reference is not compared with itself
    assert main(["compare", "--arch", "hetero", "--arch", "hhpim", "--slices", "5",
                 "--scenario", "case2", "--out", str(tmp_path)]) == EXIT_OK


def test_lut_sweep(tmp_path):
    assert main(["lut", "--out", str(tmp_path), "--seed", "5"]) == EXIT_OK
    path = tmp_path / "lut_hhpim_efficientnet.csv"
    rows = read_csv(path)
    assert header_meta(path)["seed"] == "5"
    feas = [r for r in rows if r["feasible"] == "1" and r["t_index"] != "relaxed"]
    assert rows[0]["feasible"] == "0"  # gray region
    assert float(feas[0]["E_task_norm"]) == pytest.approx(1.0)
    relaxed = rows[-1]
    assert relaxed["t_index"] == "relaxed"
    assert float(relaxed["util_LP-MRAM_%"]) == pytest.approx(100.0)
    for r in feas:
        assert sum(float(r[f"util_{s}_%"]) for s in ("HP-MRAM", "HP-SRAM", "LP-MRAM", "LP-SRAM")) \
            == pytest.approx(100.0)


def test_verify_passes_and_mutation_fails(capsys):
    assert main(["verify", "--trials", "40"]) == EXIT_OK
    assert main(["verify", "--trials", "40", "--mutate"]) == EXIT_VERIFY
    assert "FAIL" in capsys.readouterr().out


def test_verify_zero_trials_warns(capsys):
    assert main(["verify", "--trials", "0"]) == EXIT_OK
    assert "vacuous" in capsys.readouterr().out


def test_gen_workload(tmp_path):
    assert main(["gen-workload", "--scenario", "case4", "--slices", "8", "--out", str(tmp_path)]) == EXIT_OK
    text = (tmp_path / "workload_case4.csv").read_text()
    assert "# seed: 0" in text
    assert text.strip().splitlines()[-1] == "7,10"


def test_config_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[architecture]\nname = \n")
    assert main(["lut", "--arch", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "line 2" in capsys.readouterr().err
    assert main(["lut", "--model", "vgg", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["gen-workload", "--scenario", "case9", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_infeasible_exit(tmp_path):
    # a slice far shorter than one task at peak: no feasible table entry
    assert main(["lut", "--arch", "baseline", "--slice-ms", "0.0001", "--resolution", "5",
                 "--out", str(tmp_path)]) == EXIT_INFEASIBLE
