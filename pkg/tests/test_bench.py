import csv
import io
import json

import numpy as np
import pytest

from fracttm import bench
from fracttm.assembly import TensorMesh2D
from fracttm.bench import (
    CSV_COLUMNS,
    Level,
    MStudyConfig,
    StudyConfig,
    build_reference,
    emit_surface,
    m_study_csv,
    read_surface,
    run_convergence_study,
    run_m_study,
    timed_median,
)
from fracttm.metrics import convergence_rate
from fracttm.problems import example2_spec

from .test_timestep import zero_problem


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_empty_study_is_header_only():
    text = run_convergence_study(StudyConfig("example1", ())).to_csv()
    assert text == ",".join(CSV_COLUMNS) + "\n"


def test_study_validation():
    with pytest.raises(ValueError):
        StudyConfig("example1", (Level(4, 0.25, 1),), method="ttm")
    with pytest.raises(ValueError):
        StudyConfig("example2", (Level(64, 0.1, 2),), reference_res=64)
    with pytest.raises(ValueError):
        StudyConfig("example1", (), method="rk4")


def test_rates_and_determinism(tmp_path):
    levels = (Level(4, 0.125, 2), Level(8, 0.0625, 2))
    config = StudyConfig("example1", levels, alphas=(1.5,), thetas=(0.2,), epsilons=(0.1,), method="both")
    first = run_convergence_study(config).to_csv(tmp_path / "a.csv")
    second = run_convergence_study(config).to_csv()
    rows = _rows(first)
    assert [r["method"] for r in rows] == ["ttm", "ttm", "fe", "fe"]
    assert all(r["status"] == "ok" for r in rows)
    for a, b in ((rows[0], rows[1]), (rows[2], rows[3])):
        assert float(b["rate_l2"]) == pytest.approx(convergence_rate(float(a["err_l2"]), float(b["err_l2"]), 2.0))
        assert float(b["rate_mu"]) == pytest.approx(convergence_rate(float(a["err_mu"]), float(b["err_mu"]), 2.0))
    strip = lambda text: [{k: v for k, v in r.items() if k != "cpu_s"} for r in _rows(text)]  # noqa: E731
    assert strip(first) == strip(second)
    assert (tmp_path / "a.csv").read_text() == first


def test_failed_cell_is_recorded(monkeypatch):
    calls = {"n": 0}
    original = bench.run_method

    def flaky(problem, disc, method):
        calls["n"] += 1
        if calls["n"] == 1:
            raise RuntimeError("boom")
        return original(problem, disc, method)

    monkeypatch.setattr(bench, "run_method", flaky)
    rows = run_convergence_study(StudyConfig("example1", (Level(4, 0.25, 2), Level(4, 0.125, 2)))).rows
    assert rows[0]["status"].startswith("failed: RuntimeError")
    assert rows[1]["status"] == "ok" and "rate_l2" not in rows[1]


def test_timed_median_returns_first_result():
    seq = iter(range(10))
    result, seconds = timed_median(lambda: next(seq), repeats=3)
    assert result == 0 and seconds >= 0
    assert next(seq) == 4


def test_reference_cache_round_trip(tmp_path, monkeypatch):
    p = example2_spec(1.5, 0.1)
    first = build_reference(p, 6, 0.2, directory=tmp_path)
    files = list(tmp_path.glob("*.npz"))
    assert len(files) == 1

    def forbidden(*args, **kwargs):
        raise AssertionError("cache miss")

    monkeypatch.setattr(bench, "run_standard_fe", forbidden)
    second = build_reference(p, 6, 0.2, directory=tmp_path)
    assert np.array_equal(first.coeffs, second.coeffs)
    assert second.config_hash == first.config_hash
    assert np.array_equal(first.checkpoints, second.checkpoints)
    assert first.checkpoint_times[-1] == pytest.approx(1.0)
    with pytest.raises(AssertionError):
        build_reference(p, 6, 0.3, directory=tmp_path)


def test_stale_cache_is_rebuilt(tmp_path):
    p = example2_spec(1.5, 0.1)
    entry = build_reference(p, 6, 0.0, directory=tmp_path)
    path = next(tmp_path.glob("*.npz"))
    with np.load(path) as data:
        arrays = {k: data[k] for k in data.files}
    meta = json.loads(str(arrays["meta"]))
    meta["version"] = -1
    arrays["meta"] = np.array(json.dumps(meta))
    arrays["coeffs"] = np.zeros_like(arrays["coeffs"])
    np.savez(path, **arrays)
    again = build_reference(p, 6, 0.0, directory=tmp_path)
    assert np.array_equal(again.coeffs, entry.coeffs)


def test_zero_problem_reference_is_zero(tmp_path):
    entry = build_reference(zero_problem(), 5, 0.0, directory=tmp_path, use_cache=False)
    assert np.all(entry.coeffs == 0)
    assert not list(tmp_path.iterdir())


def test_cache_dir_env(monkeypatch, tmp_path):
    monkeypatch.setenv("FRACTTM_CACHE_DIR", str(tmp_path))
    assert bench.cache_dir() == tmp_path


@pytest.mark.slow
def test_reference_self_convergence(tmp_path):
    p = example2_spec(1.5, 0.01)
    coarse = build_reference(p, 64, 0.2, directory=tmp_path).solution()
    fine = build_reference(p, 100, 0.2, directory=tmp_path).solution()
    mesh = TensorMesh2D.unit_square(64)
    diff = np.asarray(coarse.coeffs) - fine.at_nodes(mesh)
    from fracttm.metrics import l2_norm

    assert l2_norm(diff, mesh) <= 1e-5


def test_m_study_rows():
    rows = run_m_study(MStudyConfig(n_cells=4, tau=0.0625, Ms=(2, 4), repeats=1))
    assert [r["M"] for r in rows] == [1, 2, 4]
    assert all(r["cpu_seconds"] >= 0 and r["err_mu"] > 0 for r in rows)
    text = m_study_csv(rows)
    assert text.splitlines()[0] == "M,cpu_seconds,err_mu,err_l2"
    with pytest.raises(ValueError):
        run_m_study(MStudyConfig(problem="example2", n_cells=4, tau=0.125, Ms=(2,), repeats=1))


def test_surface_format(tmp_path):
    mesh = TensorMesh2D.unit_square(4, 3)
    path = tmp_path / "s.txt"
    emit_surface(np.zeros(mesh.n_dofs), mesh, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x y value"
    assert len(lines) == 5 * 4 + 1
    assert np.all(read_surface(path)[:, 2] == 0)
    U = np.random.default_rng(0).normal(size=mesh.n_dofs)
    emit_surface(U, mesh, path)
    data = read_surface(path)
    assert np.array_equal(data[:, 2].reshape(4, 5), mesh.pad(U))
    assert np.array_equal(data[:5, 0], mesh.mesh_x.nodes)
    buf = io.StringIO()
    emit_surface(U, mesh, buf)
    assert buf.getvalue() == path.read_text()
