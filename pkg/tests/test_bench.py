import pytest

from cipshare.bench import (
    COLUMNS, SCHEMA, BenchConfig, UsageError, ordering_holds, read_report, run_instance, run_rows,
    summarize, write_report,
)
from cipshare.core import pathological_instance

TINY = {"seeds": [0, 1], "overrides": {"grid_rows": 5, "grid_cols": 5, "n_facilities": 9, "n_users": 5}}


def test_config_validation(tmp_path):
    with pytest.raises(UsageError):
        BenchConfig.from_dict({})
    with pytest.raises(UsageError):
        BenchConfig.from_dict({"profile": "desk"})
    with pytest.raises(UsageError):
        BenchConfig.from_dict({"seeds": [0], "colour": "red"})
    with pytest.raises(UsageError):
        BenchConfig.from_dict({"seeds": [0], "profile": "huge"})
    (tmp_path / "empty.json").write_text("  \n")
    with pytest.raises(UsageError):
        BenchConfig.load(tmp_path / "empty.json")
    assert BenchConfig.from_dict({"seeds": 3}).seeds == [0, 1, 2]


def test_pathological_row():
    row = run_instance(pathological_instance(), BenchConfig(seeds=[0]), seed=0)
    assert row["error"] == ""
    assert row["ip_opt"] == pytest.approx(1.0)
    assert row["kc_lp"] == pytest.approx(1.0) and row["dual_opt_rev"] == pytest.approx(1.0)
    assert row["naive_lp"] == pytest.approx(0.11)
    assert row["audit_dual_opt"] == "pass"


def test_rows_report_round_trip(tmp_path):
    cfg = BenchConfig.from_dict(TINY)
    rows = run_rows(cfg)
    assert [r["seed"] for r in rows] == [0, 1] and all(r["error"] == "" for r in rows)
    for r in rows:
        assert r["norm_dual_opt_rev"] == pytest.approx(r["norm_kc_lp"], abs=1e-9)
        assert r["pd_rev"] <= r["pd_obj"] + 1e-9
        assert all(r[c] == "pass" for c in ("audit_dual_opt", "audit_pd", "audit_gr", "audit_grplus"))
    path = tmp_path / "r.csv"
    write_report(rows, path, cfg)
    text = path.read_text().splitlines()
    assert text[0] == f"# schema: {SCHEMA}" and text[2].split(",") == COLUMNS
    back = read_report(path)
    assert back[1]["ip_opt"] == rows[1]["ip_opt"] and back[0]["kclp_converged"] is True
    assert "2/2 instances completed" in summarize(back)


def test_parallel_rows_keep_seed_order():
    cfg = BenchConfig.from_dict({**TINY, "seeds": [3, 1, 2], "jobs": 2})
    rows = run_rows(cfg)
    assert [r["seed"] for r in rows] == [3, 1, 2]
    serial = run_rows(BenchConfig.from_dict({**TINY, "seeds": [3, 1, 2]}))

    def untimed(r):
        return {k: v for k, v in r.items() if not k.startswith("t_")}
    assert list(map(untimed, rows)) == list(map(untimed, serial))


def test_failures_are_recorded_not_raised():
    cfg = BenchConfig.from_dict({**TINY, "seeds": [0], "ip_cap": 3})
    row = run_rows(cfg)[0]
    assert row["error"].startswith("SizeCapExceeded")


def test_ordering_helper():
    row = {"dual_opt_rev": 1.0, "pd_rev": 0.9, "grplus_rev": 0.9, "gr_rev": 0.5}
    assert ordering_holds(row)
    assert not ordering_holds({**row, "gr_rev": 0.95})
