import pytest

from cli import cli_main

FAST = ["--n-repeats", "1", "--max-budget", "40", "--n-trees", "3", "--workers", "1", "--record-timing", "false"]


def _run(blobs_csv, out, *extra):
    return cli_main([
        "run", "--data", str(blobs_csv), "--label-col", "class",
        "--strategies", "rs,ctal-divrep", "--seed", "7", "--out", str(out), *FAST, *extra,
    ])


def test_run_writes_records_and_summary(blobs_csv, tmp_path):
    out = tmp_path / "results"
    assert _run(blobs_csv, out) == 0
    records = (out / "records.csv").read_text().splitlines()
    assert records[0] == "strategy,repeat,budget,balanced_accuracy,wall_time_s"
    assert len(records) == 1 + 2 * 2
    assert (out / "summary.csv").exists()


def test_unknown_strategy(blobs_csv, tmp_path, capsys):
    code = cli_main(["run", "--data", str(blobs_csv), "--strategies", "rs,margin", "--out", str(tmp_path)])
    assert code == 1
    assert "rs, ctal-rs, ctal-divrep, irdm, qbc" in capsys.readouterr().err


def test_unknown_flag():
    assert cli_main(["run", "--bogus"]) == 1


def test_missing_subcommand():
    assert cli_main([]) == 1


def test_missing_data_file(tmp_path, capsys):
    code = cli_main(["run", "--data", str(tmp_path / "absent.csv"), "--strategies", "rs", "--out", str(tmp_path)])
    assert code == 2
    assert "absent.csv" in capsys.readouterr().err


def test_ragged_data_file(write_csv, tmp_path):
    path = write_csv("a,b,label\n1,2,x\n3,y\n")
    assert cli_main(["run", "--data", str(path), "--strategies", "rs", "--out", str(tmp_path)]) == 2


def test_summarize_reproduces_summary(blobs_csv, tmp_path):
    out = tmp_path / "results"
    assert _run(blobs_csv, out) == 0
    again = tmp_path / "again"
    assert cli_main(["summarize", "--records", str(out / "records.csv"), "--out", str(again)]) == 0
    assert (again / "summary.csv").read_bytes() == (out / "summary.csv").read_bytes()


def test_config_file_with_override(blobs_csv, tmp_path):
    config = tmp_path / "experiment.conf"
    config.write_text(
        "# quick run\n"
        f"data = {blobs_csv}\n"
        "label_col = class\n"
        "strategies = qbc\n"
        "n_repeats = 1\n"
        "max_budget = 60\n"
        "n_trees = 3\n"
        "workers = 1\n",
        encoding="utf-8",
    )
    out = tmp_path / "out"
    assert cli_main(["run", "--config", str(config), "--max-budget", "40", "--out", str(out)]) == 0
    budgets = [line.split(",")[2] for line in (out / "records.csv").read_text().splitlines()[1:]]
    assert budgets == ["20", "40"]


def test_config_file_unknown_key(tmp_path):
    config = tmp_path / "bad.conf"
    config.write_text("colour = blue\n", encoding="utf-8")
    assert cli_main(["run", "--config", str(config)]) == 1


def test_store_and_resummarize_from_database(blobs_csv, tmp_path):
    url = f"sqlite:///{tmp_path / 'store.db'}"
    assert _run(blobs_csv, tmp_path / "results", "--db", url) == 0
    assert cli_main(["summarize", "--db-run", "1", "--db", url, "--out", str(tmp_path / "stored")]) == 0
    assert (tmp_path / "stored" / "summary.csv").read_bytes() == (tmp_path / "results" / "summary.csv").read_bytes()
    assert cli_main(["summarize", "--db-run", "99", "--db", url]) == 1


def test_inspect_tree(blobs_csv, capsys):
    code = cli_main(["inspect-tree", "--data", str(blobs_csv), "--label-col", "class",
                     "--n-labeled", "30", "--export"])
    assert code == 0
    assert "leaf 0" in capsys.readouterr().out


@pytest.mark.parametrize("flag, value", [
    ("--tree-min-samples-leaf", "0"),
    ("--n-act", "-1"),
    ("--n-labeled", "0"),
    ("--impurity-weight", "0"),
])
def test_inspect_tree_rejects_bad_flag(blobs_csv, capsys, flag, value):
    code = cli_main(["inspect-tree", "--data", str(blobs_csv), "--label-col", "class", flag, value])
    assert code == 1
    assert flag in capsys.readouterr().err


def test_describe(blobs_csv, capsys):
    assert cli_main(["describe", "--data", str(blobs_csv), "--label-col", "class"]) == 0
    output = capsys.readouterr().out
    assert "genuine" in output and "forged" in output


def test_compare(tmp_path, capsys):
    summary = tmp_path / "summary.csv"
    summary.write_text(
        "strategy,budget,mean,std,p_vs_best,is_best,is_equivalent\n"
        "ctal-divrep,200,0.985,0.009,,1,1\n"
        "rs,200,0.90,0.02,0.0001,0,0\n",
        encoding="utf-8",
    )
    assert cli_main(["compare", "--summary", str(summary), "--dataset", "banknote"]) == 0
    output = capsys.readouterr().out
    assert "PASS" in output and "FAIL" in output


@pytest.mark.parametrize("dataset", ["iris", "unknown"])
def test_compare_unknown_benchmark(tmp_path, dataset):
    summary = tmp_path / "summary.csv"
    summary.write_text("strategy,budget,mean,std,p_vs_best,is_best,is_equivalent\nrs,200,0.9,0.1,,1,1\n")
    assert cli_main(["compare", "--summary", str(summary), "--dataset", dataset]) == 1
