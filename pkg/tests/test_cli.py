import stat

import pytest
from hypothesis import given, settings, strategies as st

from wannierframes.cli import main, run, write_atomic
from wannierframes.config import RunConfig, load_config, parse_config, validate
from wannierframes.errors import ConfigError

QWZ = """\
# Chern insulator, lower band
model.name = qwz
model.u = 1.0
grid.n1 = 16
grid.n2 = 16
window.lo = 1
window.hi = 1
seed = 3
"""


def config_text(overrides=None, **kw):
    """QWZ config with some keys replaced, e.g. ``config_text({"model.u": 0})``."""
    lines = dict(line.split(" = ") for line in QWZ.splitlines() if " = " in line)
    lines.update({k: str(v) for k, v in {**(overrides or {}), **kw}.items()})
    return "\n".join(f"{k} = {v}" for k, v in lines.items()) + "\n"


def kinds(diags):
    return {d.kind for d in diags}


def test_parse_basic():
    cfg = parse_config(QWZ)
    assert cfg.model_name == "qwz" and cfg.model_params == {"u": 1.0}
    assert cfg.grid == (16, 16) and (cfg.window_lo, cfg.window_hi) == (1, 1)
    assert cfg.seed == 3 and cfg.route == "auto" and not cfg.diagnostics
    assert validate(cfg) == []


def test_syntax_problems_are_diagnostics():
    cfg = parse_config("model.name qwz\ngrid.n1 = x\nfoo.bar = 1\nseed = 1\nseed = 2\n")
    assert kinds(cfg.diagnostics) == {"syntax", "type", "unknown-key", "duplicate-key"}


def test_unknown_model_lists_valid_ones():
    diags = validate(parse_config(config_text({"model.name": "nope"})))
    (d,) = [d for d in diags if d.kind == "unknown-model"]
    for name in ("qwz", "haldane", "atomic", "ssh", "qwz_stack_3d"):
        assert name in d.message


def test_grid_of_one_point():
    assert "grid-too-coarse" in kinds(validate(parse_config(config_text({"grid.n1": 1}))))


def test_window_beyond_fiber():
    diags = validate(parse_config(config_text({"window.hi": 3})))
    assert any(d.key == "window.hi" and d.kind == "range" for d in diags)


def test_dimension_mismatch_and_bad_choices():
    diags = validate(parse_config(config_text({"grid.n3": 4, "route": "sideways", "projector.q_pts": 10})))
    keys = {d.key for d in diags}
    assert {"grid", "route", "projector.q_pts"} <= keys


def test_unknown_model_parameter():
    diags = validate(parse_config(config_text({"model.t9": 1})))
    assert any(d.key == "model.t9" for d in diags)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")


def test_overrides():
    cfg = parse_config(QWZ).with_overrides(seed=9, out="x", route="embedded", grid=(8, 8))
    assert (cfg.seed, cfg.output_dir, cfg.route, cfg.grid) == (9, "x", "embedded", (8, 8))


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from(["qwz", "haldane", "atomic"]),
    st.lists(st.integers(2, 64), min_size=2, max_size=2),
    st.sampled_from(["auto", "basis", "augmented", "embedded"]),
    st.integers(0, 10**6),
    st.floats(-4, 4, allow_nan=False),
)
def test_summary_round_trips(name, grid, route, seed, u):
    params = {"u": u} if name == "qwz" else {}
    cfg = RunConfig(model_name=name, model_params=params, grid=tuple(grid), window_lo=1, window_hi=1,
                    route=route, seed=seed)
    again = parse_config("\n".join(cfg.summary_lines()))
    assert again == cfg


def run_cfg(tmp_path, text, **kw):
    return run(parse_config(text).with_overrides(out=tmp_path / "out", **kw), timestamp="T")


def test_run_atomic(tmp_path):
    text = "model.name = atomic\nmodel.d = 2\nmodel.dim = 2\ngrid.n1 = 8\ngrid.n2 = 8\nwindow.lo = 1\n"
    res = run_cfg(tmp_path, text)
    assert res.exit_code == 0, res.report
    assert "l: 1" in res.report and "route: basis" in res.report
    assert res.report.rstrip().endswith("result: OK code=0")


def test_run_qwz(tmp_path):
    res = run_cfg(tmp_path, QWZ)
    assert res.exit_code == 0, res.report
    assert "c12: -1" in res.report and "l: 2" in res.report
    out = tmp_path / "out"
    for name in ("report.txt", "bands.csv", "chern.txt", "frame.txt", "wannier_coeffs.csv", "wannier_shells.csv"):
        assert (out / name).exists()
    assert (out / "chern.txt").read_text().splitlines()[1].startswith("c12,-1,")
    sections = [line for line in res.report.splitlines() if line.startswith("[")]
    assert sections == ["[config]", "[model]", "[gap]", "[projectors]", "[chern]", "[frame]", "[decay]", "[parseval]"]


def test_run_gapless_writes_partial_report(tmp_path):
    res = run_cfg(tmp_path, config_text({"model.u": 0.0}))
    assert res.exit_code == 3
    last = res.report.rstrip().splitlines()[-1]
    assert last.startswith("result: FAIL code=3") and "stage=gap" in last
    assert "[frame]" not in res.report
    assert (tmp_path / "out" / "report.txt").read_text() == res.report


def test_run_basis_route_on_chern_band(tmp_path):
    res = run_cfg(tmp_path, QWZ, route="basis")
    assert res.exit_code == 6 and "stage=frame" in res.reason and "c12 = -1" in res.reason


def test_run_invalid_config(tmp_path):
    res = run_cfg(tmp_path, config_text({"model.name": "nope"}))
    assert res.exit_code == 2 and "[diagnostics]" in res.report


def test_run_is_deterministic_apart_from_timestamp(tmp_path):
    cfg = parse_config(QWZ)
    a = run(cfg.with_overrides(out=tmp_path / "a"), timestamp="2020-01-01")
    b = run(cfg.with_overrides(out=tmp_path / "b"))
    strip = lambda r: [x for x in r.splitlines() if not x.startswith("timestamp: ")]  # noqa: E731
    assert strip(a.report) == strip(b.report)
    for name in a.files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_run_embedded_and_three_dimensional(tmp_path):
    assert run_cfg(tmp_path, QWZ, route="embedded").exit_code == 0
    text = "model.name = qwz_stack_3d\ngrid.n1 = 8\ngrid.n2 = 8\ngrid.n3 = 8\nwindow.lo = 1\n"
    res = run_cfg(tmp_path, text)
    assert res.exit_code == 0 and "c12: -1" in res.report and "c13: 0" in res.report


def test_write_atomic(tmp_path):
    target = tmp_path / "f.txt"
    target.write_text("old")
    write_atomic(target, "new\n")
    assert target.read_text() == "new\n"
    assert stat.S_IMODE(target.stat().st_mode) == 0o644
    assert [p.name for p in tmp_path.iterdir()] == ["f.txt"]


def test_main_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(QWZ)
    assert main(["validate", "--config", str(cfg)]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert "result: OK code=0" in capsys.readouterr().out
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--route", "basis"]) == 6
    assert "kind=obstructed" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "nope.cfg")]) == 2
    assert main(["run", "--config", str(cfg), "--grid", "1,16", "--out", str(tmp_path / "o")]) == 2
    assert main(["frobnicate"]) == 2


def test_main_models(capsys):
    assert main(["models"]) == 0
    out = capsys.readouterr().out
    assert "qwz(u=" in out and "haldane(" in out and "qwz_stack_3d(" in out
