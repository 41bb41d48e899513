import csv
import io
import json

import pytest

from plateaulab.cli import (render_svg, EXIT_CAPACITY, EXIT_CONFIG, EXIT_OK, ConfigError, ExperimentConfig,
                            cell_seed, emit_report, eval_rule, layer_values, main, parse_n,
                            parse_sector, rows_to_csv)
from plateaulab.variance import CSV_COLUMNS


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_parse_n_forms():
    assert parse_n("4,6,8") == [4, 6, 8]
    assert parse_n("4..7") == [4, 5, 6, 7]
    assert parse_n("4..10:2") == [4, 6, 8, 10]
    with pytest.raises(ConfigError):
        parse_n("four")


def test_layer_rules():
    assert eval_rule("6n", 4) == 24
    assert eval_rule("n/2", 8) == 4
    assert layer_values("6n", 3) == [18]
    assert layer_values([2, "n"], 5) == [2, 5]
    with pytest.raises(ConfigError):
        eval_rule("__import__('os')", 2)


def test_sector_flag():
    assert parse_sector("m=2") == {"m": 2}
    with pytest.raises(ConfigError):
        parse_sector("k=1")


def test_schema_errors_name_the_field():
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict({"kind": "dla-sweep", "seed": 0, "model": "tfim", "n": [0]})
    assert err.value.path == "n/0"
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict({"kind": "dla-sweep", "seed": 0, "model": "tfim", "n": []})
    assert err.value.path == "n"
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict({"kind": "dla-sweep", "seed": 0, "model": "nope", "n": [2]})
    assert err.value.path == "model"


def test_cell_seed_depends_on_coordinates():
    assert cell_seed(1, {"n": 4}) == cell_seed(1, {"n": 4})
    assert cell_seed(1, {"n": 4}) != cell_seed(1, {"n": 6})
    assert cell_seed(1, {"n": 4}) != cell_seed(2, {"n": 4})


def test_digest_ignores_output_settings():
    base = {"kind": "dla-sweep", "seed": 0, "model": "tfim", "n": [2]}
    a = ExperimentConfig.from_dict(base)
    b = ExperimentConfig.from_dict({**base, "out": "x.csv", "workers": 4})
    assert a.digest() == b.digest()
    assert a.digest() != ExperimentConfig.from_dict({**base, "seed": 1}).digest()


def test_dla_subcommand(capsys):
    assert main(["dla", "--model", "tfim", "--n", "2..5"]) == EXIT_OK
    rows = _rows(capsys.readouterr().out)
    assert [int(r["dimension"]) for r in rows] == [4, 9, 16, 25]
    assert all(r["status"] == "ok" for r in rows)


def test_exit_codes(capsys, tmp_path):
    assert main(["dla", "--model", "bogus", "--n", "2"]) == EXIT_CONFIG
    assert main(["variance", "--model", "tfim", "--n", "4", "--mu", "0,1"]) == EXIT_CONFIG
    assert main(["nonsense"]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["dla", "--config", str(bad)]) == EXIT_CONFIG
    code = main(["variance", "--model", "tfim", "--n", "20", "--layers", "2",
                 "--samples", "4"])
    assert code == EXIT_CAPACITY
    assert _rows(capsys.readouterr().out)[-1]["status"].startswith("capacity")


def test_config_file_and_flags_merge(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kind": "theory-compare", "seed": 3, "model": "xxz_c",
                               "n": [4], "params": {"m": 1}}))
    assert main(["theory", "--config", str(cfg), "--format", "json"]) == EXIT_OK
    rows = json.loads(capsys.readouterr().out)
    assert rows[0]["theory"] == pytest.approx(2 / 9)
    assert main(["dla", "--config", str(cfg)]) == EXIT_CONFIG


def test_graph_run_is_reproducible_across_workers(tmp_path):
    outs = []
    for w in ("1", "3"):
        path = tmp_path / f"g{w}.csv"
        args = ["graph", "--n", "4", "--layers", "3", "--samples", "30", "--seed", "1",
                "--param", "seed=[0,1]", "--workers", w, "--out", str(path)]
        assert main(args) == EXIT_OK
        outs.append(path.read_text())
    assert outs[0] == outs[1]
    assert len(_rows(outs[0])) == 2


def test_empty_report_is_header_only():
    text = emit_report([], "csv", None, "variance-sweep")
    assert text.strip().split(",")[:len(CSV_COLUMNS)] == list(CSV_COLUMNS)
    assert len(text.strip().splitlines()) == 1


def test_csv_column_order_is_stable():
    row = {"zeta": 1, "model": "tfim", "status": "ok", "variance": 0.5}
    header = rows_to_csv([row]).splitlines()[0].split(",")
    assert header.index("model") < header.index("variance") < header.index("zeta")
    assert header[-1] == "status"


def test_large_report_round_trip():
    rows = [{"model": "hea", "n": i, "variance": 1.0 / (i + 1), "status": "ok"}
            for i in range(100)]
    back = _rows(rows_to_csv(rows))
    assert len(back) == 100
    assert [float(r["variance"]) for r in back] == [1.0 / (i + 1) for i in range(100)]


def test_svg_is_deterministic(tmp_path):
    texts = []
    for i in range(2):
        path = tmp_path / f"v{i}.svg"
        assert main(["variance", "--model", "tfim", "--n", "2,3,4", "--layers", "4",
                     "--samples", "20", "--format", "svg", "--out", str(path)]) == EXIT_OK
        texts.append(path.read_text())
    assert texts[0] == texts[1] and "<svg" in texts[0]
    assert main(["variance", "--model", "tfim", "--n", "2", "--format", "svg"]) == EXIT_CONFIG


def test_svg_with_short_series(tmp_path):
    rows = [{"model": "xxz_c", "boundary": "open", "sector": "m=1", "n": n,
             "variance": 0.1 / n, "dim_g_sub": n * n, "status": "ok"} for n in (4, 6)]
    render_svg(rows, str(tmp_path / "short.svg"))
    assert (tmp_path / "short.svg").read_text().count("<svg") == 1
