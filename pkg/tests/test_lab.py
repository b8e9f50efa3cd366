import os
import subprocess
import sys

import numpy as np
import pytest

from featlab.cli import main
from featlab.config import ExperimentConfig, build_config, load_config, parse_pairs
from featlab.errors import InputError, InstabilityError
from featlab.experiments import kgf_vs_gsm_point, resolve_workers, run, target_coefficients
from featlab.rates import RateQuery
from featlab.tables import ResultTable, csv_body, fit_slope

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def _cfg(text, **kw):
    return build_config(parse_pairs(text), **kw)


def _write(tmp_path, text, name="exp.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


SMALL_NET = "kind = net-align\nd = 6\nm = 20\nn = 80\nsteps = 20\nrecord_every = 5\np = 3\nseed = 4\nreplicates = 3\n"


# ------------------------------------------------------------- config


def test_parse_pairs_builds_lists_and_strips_comments():
    pairs = parse_pairs("# header\nn = 4  # trailing\nn = 8\n\nkind = rates\n")
    assert pairs == {"n": ["4", "8"], "kind": ["rates"]}
    with pytest.raises(InputError):
        parse_pairs("no equals sign here")
    with pytest.raises(InputError):
        parse_pairs(" = 3")


def test_range_values_are_inclusive():
    cfg = _cfg("kind = rates\nregime = high-d-krr\ns = 0.5\ngamma = 0.3:3.0:0.1\n")
    assert len(cfg["gamma"]) == 28
    assert cfg["gamma"][0] == 0.3 and cfg["gamma"][-1] == 3.0 and cfg["gamma"][13] == 1.6
    cfg = _cfg("kind = kernel-curve\nkernel = k1\nn = 4:7:1\n")
    assert cfg["n"] == [4, 5, 6, 7]


@pytest.mark.parametrize("text", [
    "kind = gsm-curve\nbeta = 2\ns = 1.5\ntheta_exponent = 0.5\n",           # missing n
    "kind = gsm-curve\nbeta = 2\ns = 1.5\ntheta_exponent = 0.5\nn =\n",      # empty n list
    "kind = rates\ns = 1\ncolour = red\n",                                     # unknown key
    "kind = teleport\n",                                                       # unknown kind
    "kind = rates\ns = 1\nbeta = 2\nseeds = 3\nseeds = 3\n",                   # repeated seed
    "kind = rates\ns = one\nbeta = 2\n",                                       # unparsable value
    "kind = opgsm-sim\neta = 0.1\neta = 0.2\n",                                # scalar given twice
    "kind = rates\ns = 1\nbeta = 2\nreplicates = 0\n",
    "kind = rates\ns = 1\nbeta = 2\ngamma = 3:1:1\n",                          # descending range
])
def test_invalid_configs_are_rejected(text):
    with pytest.raises(InputError):
        _cfg(text)


def test_kind_argument_must_agree_with_file():
    with pytest.raises(InputError):
        _cfg("kind = rates\ns = 1\nbeta = 2\n", kind="gsm-curve")


def test_seed_expansion_and_override():
    a = _cfg(SMALL_NET)
    assert len(a.seeds) == 3 and len(set(a.seeds)) == 3
    b = _cfg(SMALL_NET, seed=5)
    assert set(a.seeds).isdisjoint(b.seeds)
    listed = _cfg("kind = net-align\nseeds = 1\nseeds = 9\n")
    assert listed.seeds == (1, 9)


def test_experiment_config_invariants():
    with pytest.raises(InputError):
        ExperimentConfig("rates", {}, ())
    with pytest.raises(InputError):
        ExperimentConfig("rates", {}, (1, 1))
    with pytest.raises(InputError):
        ExperimentConfig("rates", {}, (1,), workers=0)


def test_config_hash_tracks_semantic_fields():
    base = _cfg(SMALL_NET)
    assert _cfg(SMALL_NET).config_hash() == base.config_hash()
    assert _cfg(SMALL_NET, out="x.csv", workers=3).config_hash() == base.config_hash()
    assert _cfg(SMALL_NET.replace("m = 20", "m = 22")).config_hash() != base.config_hash()
    assert _cfg(SMALL_NET, seed=5).config_hash() != base.config_hash()
    assert _cfg(SMALL_NET + "eta = 0.5000001\n").config_hash() != base.config_hash()


def test_missing_config_file(tmp_path):
    with pytest.raises(InputError):
        load_config(str(tmp_path / "absent.cfg"))


# ---------------------------------------------------------- fit_slope


def _table(x, y):
    return ResultTable(("n", "risk"), list(zip(x, y)))


def test_fit_slope_exact_power_law():
    n = 2.0 ** np.arange(7, 13)
    fit = fit_slope(_table(n, n**-0.75), "n", "risk")
    assert fit.slope == pytest.approx(-0.75, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)


def test_fit_slope_flat_data():
    n = 2.0 ** np.arange(7, 13)
    assert fit_slope(_table(n, np.full(n.size, 0.3)), "n", "risk").slope == pytest.approx(0.0, abs=1e-12)


def test_fit_slope_perturbed_power_law():
    n = 2.0 ** np.arange(7, 13)
    alt = (-1.0) ** np.arange(n.size)
    fit = fit_slope(_table(n, 3 / n * (1 + 0.01 * alt)), "n", "risk")
    assert abs(fit.slope + 1) <= 0.01


def test_fit_slope_drops_smallest_and_validates():
    n = 2.0 ** np.arange(7, 13)
    y = n**-0.5
    y[0] = 1.0  # outlier at the smallest n
    assert fit_slope(_table(n[::-1], y[::-1]), "n", "risk", drop_smallest=1).slope == pytest.approx(-0.5)
    with pytest.raises(InputError):
        fit_slope(_table(n, -y), "n", "risk")
    with pytest.raises(InputError):
        fit_slope(_table(n[:5], y[:5]), "n", "risk", drop_smallest=2)


def test_result_table_is_rectangular():
    t = ResultTable(("a", "b"))
    with pytest.raises(InputError):
        t.append((1,))
    with pytest.raises(InputError):
        ResultTable(("a", "a"))


# ------------------------------------------------------------------ run


def test_rates_table_matches_direct_calculation():
    cfg = load_config(os.path.join(CONFIGS, "rates.cfg"))
    table = run(cfg)
    assert len(table.rows) == 2 * 2 * 28
    for row in table.rows:
        regime, s, beta, gamma, theta = row[:5]
        res = RateQuery(regime, s, beta, gamma, theta).evaluate()
        assert row[5:] == (res.n_exponent, res.d_exponent, res.saturated, res.inconsistent, res.period,
                           res.branch, res.label)


def test_gsm_curve_reports_slope_in_metadata():
    cfg = load_config(os.path.join(CONFIGS, "gsm_curve.cfg"))
    table = run(cfg)
    sub = table.where(theta_exponent=0.5)
    assert table.metadata["slope_theta0.5"] == pytest.approx(fit_slope(sub, "n", "risk").slope, abs=1e-15)
    assert table.metadata["predicted_theta0.5"] == pytest.approx(-0.75)
    assert table.metadata["predicted_theta2.0"] == "saturated"


def test_empty_n_list_creates_no_file(tmp_path):
    out = tmp_path / "curve.csv"
    path = _write(tmp_path, "kind = gsm-curve\nbeta = 2\ns = 1.5\ntheta_exponent = 0.5\nn =\n")
    with pytest.raises(InputError):
        load_config(path, out=str(out))
    assert main(["gsm-curve", "--config", path, "--out", str(out)]) == 2
    assert not out.exists()


def test_short_grid_creates_no_file(tmp_path):
    out = tmp_path / "curve.csv"
    path = _write(tmp_path, "kind = gsm-curve\nbeta = 2\ns = 1.5\ntheta_exponent = 0.5\nn = 64\nn = 128\n")
    assert main(["gsm-curve", "--config", path, "--out", str(out)]) == 2
    assert not out.exists()


def test_rerun_gives_identical_body_and_header(tmp_path):
    path = _write(tmp_path, SMALL_NET)
    outs = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for o in outs:
        assert main(["net-align", "--config", path, "--out", str(o)]) == 0
    a, b = (o.read_text() for o in outs)
    assert csv_body(a) == csv_body(b)
    head = [line for line in a.splitlines() if line.startswith("# config_hash")]
    assert head and head[0] in b


def test_worker_count_does_not_change_rows(tmp_path, monkeypatch):
    monkeypatch.delenv("LAB_WORKERS", raising=False)
    path = _write(tmp_path, SMALL_NET)
    bodies = []
    for k in (1, 3):
        out = tmp_path / f"w{k}.csv"
        assert main(["net-align", "--config", path, "--out", str(out), "--workers", str(k)]) == 0
        bodies.append(csv_body(out.read_text()))
    assert bodies[0] == bodies[1]


def test_environment_overrides_worker_flag(monkeypatch):
    monkeypatch.setenv("LAB_WORKERS", "4")
    assert resolve_workers(1) == 4
    monkeypatch.setenv("LAB_WORKERS", "lots")
    with pytest.raises(InputError):
        resolve_workers(1)
    monkeypatch.setenv("LAB_WORKERS", "0")
    with pytest.raises(InputError):
        resolve_workers(2)
    monkeypatch.delenv("LAB_WORKERS")
    assert resolve_workers(2) == 2


def test_bad_environment_workers_exit_code(tmp_path, monkeypatch):
    monkeypatch.setenv("LAB_WORKERS", "-1")
    path = _write(tmp_path, SMALL_NET)
    assert main(["net-align", "--config", path, "--out", str(tmp_path / "o.csv")]) == 2


def test_numerical_failure_exit_code_and_grid_point(tmp_path, capsys):
    path = _write(tmp_path, SMALL_NET + "eta = 1e4\n")
    assert main(["net-align", "--config", path, "--out", str(tmp_path / "o.csv")]) == 3
    err = capsys.readouterr().err
    assert "task failed at grid point" in err and "seed=" in err


def test_numerical_failure_keeps_exception_type():
    cfg = _cfg(SMALL_NET + "eta = 1e4\n")
    with pytest.raises(InstabilityError, match="grid point"):
        run(cfg)


def test_usage_errors_exit_with_two(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["teleport", "--config", "x"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["rates"])
    assert exc.value.code == 2
    assert main(["rates", "--config", str(tmp_path / "absent.cfg")]) == 2


def test_tsv_alongside_csv(tmp_path):
    path = _write(tmp_path, SMALL_NET)
    out = tmp_path / "net.csv"
    assert main(["net-align", "--config", path, "--out", str(out), "--tsv"]) == 0
    tsv = (tmp_path / "net.tsv").read_text()
    assert not any(line.startswith("#") for line in tsv.splitlines())
    assert tsv.replace("\t", ",") == csv_body(out.read_text())
    assert main(["net-align", "--config", path, "--tsv"]) == 2


def test_csv_layout(tmp_path):
    path = _write(tmp_path, SMALL_NET)
    out = tmp_path / "net.csv"
    main(["net-align", "--config", path, "--out", str(out)])
    lines = out.read_text().splitlines()
    assert lines[0] == "# kind = net-align"
    assert [line.split(" = ")[0] for line in lines[:4]] == ["# kind", "# config_hash", "# version", "# seeds"]
    assert lines[4] == "seed,step,train_loss,fraction_p3"
    assert lines[-1].startswith("# wall_time_s = ")
    assert len(csv_body(out.read_text()).splitlines()) == 1 + 3 * 5


def test_stdout_when_no_out_path(tmp_path):
    path = _write(tmp_path, "kind = rates\nregime = high-d-interp\ns = 2\ngamma = 1.5\n")
    proc = subprocess.run([sys.executable, "-m", "featlab.cli", "rates", "--config", path],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    body = csv_body(proc.stdout).splitlines()
    assert body[0].startswith("regime,s,") and body[1].startswith("high-d-interp,2.0,")


# ----------------------------------------------------------- kgf-vs-gsm


def test_kgf_vs_gsm_zero_estimator():
    norm2 = float(np.sum(target_coefficients("k1").coeffs ** 2))
    row = kgf_vs_gsm_point(seed=0, n=64, t=0.0, sigma=0.0)
    _, _, _, _, kgf, kgf_bias, gsm, gsm_bias, gsm_var, ratio = row
    assert kgf == pytest.approx(norm2, rel=1e-12)
    assert gsm == pytest.approx(norm2, rel=1e-12)
    assert gsm_var == 0.0 and ratio == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_kgf_vs_gsm_bias_decreases_with_t(seed):
    ts = [2.0, 4.0, 8.0, 16.0, 32.0]
    rows = [kgf_vs_gsm_point(seed, 256, t, 0.1) for t in ts]
    kgf_bias = [r[5] for r in rows]
    gsm_bias = [r[7] for r in rows]
    assert np.all(np.diff(kgf_bias) < 0)
    assert np.all(np.diff(gsm_bias) < 0)
