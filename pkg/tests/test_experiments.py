import json
import os

import numpy as np
import pytest

from proxrate import ExperimentConfig, StoppingRule, fista_phase_space, ista, run_experiment, tail_rate_estimate
from proxrate import io
from proxrate.certify import annotate_trace
from proxrate.experiments import ConfigError, build_instance, iterations_to_threshold
from proxrate.instances import build_tridiagonal_lasso


def small_config(tmp_path, **overrides):
    d = {
        "instance": {"type": "random_lasso", "m": 20, "d": 10, "mu_target": 0.2, "L_target": 2.0,
                     "seed": 3, "lambda": 0.05},
        "solvers": ["ista", "fista_momentum", "fista_phase_space"],
        "output_dir": str(tmp_path),
        "stop": {"max_iters": 100},
    }
    d.update(overrides)
    return ExperimentConfig.from_dict(d)


def test_format_real_round_trips():
    for v in (0.1, 1 / 3, 1e-300, -2.5e17, 5e-324):
        assert float(io.format_real(v)) == v
    assert io.format_real(float("nan")) == ""
    assert io.format_real(None) == ""


def test_trace_csv_round_trip(tmp_path, small_lasso, small_reference):
    trace = fista_phase_space(small_lasso, np.zeros(small_lasso.dimension), 0.5 / small_lasso.lipschitz,
                              StoppingRule(40))
    cols = annotate_trace(small_lasso, trace, small_reference.x, small_reference.phi)
    path = io.write_trace_csv(cols, tmp_path / "t.csv")
    table = io.read_trace_csv(path)
    assert table == io.TraceTable(dict(cols))
    for name in io.TRACE_COLUMNS:
        np.testing.assert_array_equal(table[name], cols[name])
    assert path.read_text().splitlines()[0] == ",".join(io.TRACE_COLUMNS)


def test_trace_csv_rejects_malformed(tmp_path, small_lasso):
    trace = ista(small_lasso, np.zeros(small_lasso.dimension), 0.1, StoppingRule(5), keep_iterates=False)
    cols = {"k": trace.k, "gs_norm_sq": trace.gs_norm_sq}
    path = io.write_trace_csv(cols, tmp_path / "t.csv")
    text = path.read_text()
    table = io.read_trace_csv(path)
    assert table["phi_x_gap"] is None

    cases = {
        "truncated": text[:-3],
        "header": text.replace("gs_norm_sq", "gs", 1),
        "fields": text.replace("\n1,", "\n1,,", 1),
        "gap": text.replace("\n2,", "\n5,", 1),
        "empty": ",".join(io.TRACE_COLUMNS) + "\n",
    }
    for name, bad in cases.items():
        p = tmp_path / f"{name}.csv"
        p.write_text(bad)
        with pytest.raises(io.FormatError):
            io.read_trace_csv(p)


def test_npz_round_trip(tmp_path, small_lasso):
    for method in (ista, fista_phase_space):
        trace = method(small_lasso, np.zeros(small_lasso.dimension), 0.5 / small_lasso.lipschitz, StoppingRule(30))
        loaded = io.load_trace(io.save_trace(trace, tmp_path / "t.npz"))
        assert loaded == trace
        assert (loaded.x is loaded.y) == (trace.x is trace.y)
    lean = ista(small_lasso, np.zeros(small_lasso.dimension), 0.1, StoppingRule(3), keep_iterates=False)
    assert io.load_trace(io.save_trace(lean, tmp_path / "lean.npz")) == lean


def test_load_trace_rejects_garbage(tmp_path):
    p = tmp_path / "x.npz"
    p.write_bytes(b"not a zip")
    with pytest.raises(io.FormatError):
        io.load_trace(p)


def test_instance_round_trip(tmp_path, small_lasso):
    for problem in (small_lasso, build_tridiagonal_lasso(30, 2.0, 1.0, 1.0, 1e-3)):
        loaded = io.load_instance(io.save_instance(problem, tmp_path / "i.json"))
        assert loaded.operator == problem.operator
        np.testing.assert_array_equal(loaded.b, problem.b)
        assert (loaded.lam, loaded.mu, loaded.lipschitz) == (problem.lam, problem.mu, problem.lipschitz)
        x = np.linspace(-1, 1, problem.dimension)
        assert loaded.objective(x) == problem.objective(x)


def test_instance_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{")
    with pytest.raises(io.FormatError):
        io.load_instance(p)
    p.write_text(json.dumps({"operator": {"kind": "sparse"}, "b": [], "lambda": 0, "mu": 0, "L": 1}))
    with pytest.raises(io.FormatError):
        io.load_instance(p)
    p.write_text(json.dumps({"b": [1.0]}))
    with pytest.raises(io.FormatError):
        io.load_instance(p)


def test_plot_series(tmp_path, small_lasso, small_reference):
    trace = ista(small_lasso, np.zeros(small_lasso.dimension), 1.0 / small_lasso.lipschitz, StoppingRule(20))
    table = io.TraceTable(annotate_trace(small_lasso, trace, small_reference.x, small_reference.phi))
    k, vals, env = io.plot_series(table, "gs", log10=True)
    np.testing.assert_allclose(vals, np.log10(trace.gs_norm_sq))
    assert env is not None
    _, _, env = io.plot_series(table, "lyapunov")
    assert env is None
    with pytest.raises(ValueError):
        io.plot_series(table, "energy")
    lines = io.write_plot_data(table, "obj", tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "k,obj,envelope" and len(lines) == 22
    lean = io.TraceTable({"k": np.arange(3), "gs_norm_sq": np.ones(3), "phi_x_gap": None, "phi_y_gap": None,
                          "lyapunov": None, "envelope_obj": None, "envelope_grad": None})
    with pytest.raises(ValueError, match="absent"):
        io.plot_series(lean, "obj")


def test_tail_rate_of_geometric_series():
    assert tail_rate_estimate(0.9 ** np.arange(100)) == pytest.approx(0.9, rel=1e-10)
    with pytest.raises(ValueError):
        tail_rate_estimate(np.ones(5))


def test_tail_rate_with_exact_zero():
    series = np.concatenate([0.5 ** np.arange(30), np.zeros(10)])
    with pytest.warns(RuntimeWarning, match="zero"):
        assert tail_rate_estimate(series) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        with pytest.warns(RuntimeWarning):
            tail_rate_estimate(np.concatenate([[1.0, 0.5], np.zeros(30)]))


def test_iterations_to_threshold():
    assert iterations_to_threshold([1.0, 0.1, 1e-3, 1e-5], 1e-3) == 2
    assert iterations_to_threshold([1.0, 0.1], 1e-3) is None


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        small_config(tmp_path, solvers=[])
    with pytest.raises(ConfigError):
        small_config(tmp_path, solvers=["adam"])
    with pytest.raises(ConfigError):
        small_config(tmp_path, step=-1.0)
    with pytest.raises(ConfigError):
        small_config(tmp_path, step="auto")
    with pytest.raises(ConfigError):
        small_config(tmp_path, instance={"type": "circle"})
    with pytest.raises(ConfigError):
        small_config(tmp_path, colour="red")
    with pytest.raises(ConfigError):
        small_config(tmp_path, stop={"max_iters": 0})
    with pytest.raises(ConfigError):
        build_instance({"type": "random_lasso", "m": 3})
    p = tmp_path / "c.json"
    p.write_text("[")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(p)


def test_run_experiment_writes_everything(tmp_path):
    files = run_experiment(small_config(tmp_path / "out"))
    summary = json.loads(files["summary"].read_text())
    assert set(summary["solvers"]) == {"ista", "fista_momentum", "fista_phase_space"}
    for name, entry in summary["solvers"].items():
        assert entry["certificate"] == "certified"
        assert entry["iterations"] == 100
        assert 0 < entry["tail_rate"] < 1
        assert files[f"{name}_plot"].read_text().startswith("k,gs")
        assert io.load_report(files[f"{name}_certificate"]).passed
    fista = summary["solvers"]["fista_momentum"]["iterations_to_threshold"]["1e-08"]
    ista_ = summary["solvers"]["ista"]["iterations_to_threshold"]["1e-08"]
    assert fista is not None and (ista_ is None or fista < ista_)


def test_run_experiment_x0_from_file(tmp_path):
    np.save(tmp_path / "x0.npy", np.ones(10))
    files = run_experiment(small_config(tmp_path / "out", x0={"file": str(tmp_path / "x0.npy")}, solvers=["ista"]))
    trace = io.load_trace(files["ista_npz"])
    np.testing.assert_array_equal(trace.y[0], np.ones(10))
    (tmp_path / "x0.json").write_text("[1, 2]")
    with pytest.raises(ConfigError):
        run_experiment(small_config(tmp_path / "out2", x0={"file": str(tmp_path / "x0.json")}))


def test_run_experiment_is_byte_deterministic(tmp_path):
    a = run_experiment(small_config(tmp_path / "a"))
    b = run_experiment(small_config(tmp_path / "b"))
    for key in a:
        if key.endswith("_trace") or key.endswith("_plot") or key == "summary":
            assert a[key].read_bytes() == b[key].read_bytes(), key


@pytest.mark.skipif(hasattr(os, "geteuid") and os.geteuid() == 0, reason="root ignores permissions")
def test_unwritable_output_dir(tmp_path):
    locked = tmp_path / "locked"
    locked.mkdir()
    locked.chmod(0o500)
    try:
        with pytest.raises(ConfigError, match="not writable"):
            run_experiment(small_config(locked / "sub"))
    finally:
        locked.chmod(0o700)


def test_output_path_is_a_file(tmp_path):
    f = tmp_path / "file"
    f.write_text("")
    with pytest.raises(ConfigError, match="not writable"):
        run_experiment(small_config(f))
