import numpy as np
import pytest

from graphon_fbsde import fbsde, plots, trainer
from graphon_fbsde import graphon as G
from graphon_fbsde.artifacts import CsvParseError, read_csv, sha256_file
from graphon_fbsde.market import MarketModel, TimeGrid, label_grid, sample_batch
from graphon_fbsde.oracle import ClosedFormParams, oracle_trajectory

GRID = TimeGrid(1.0, 10)


def _history(tmp_path, name="h.csv", seed=0):
    cfg = trainer.TrainConfig(G.constant(), MarketModel(), GRID, K=20, M=16, eval_every=5, M_val=32,
                              hidden=(4,), seed=seed)
    path = tmp_path / name
    trainer.write_history_csv(trainer.train(cfg), path)
    return path


class TestDeterminism:
    def test_same_input_same_bytes(self, tmp_path):
        csv_path = _history(tmp_path)
        a = plots.plot_history(csv_path, tmp_path / "a.svg")
        b = plots.plot_history(csv_path, tmp_path / "b.svg")
        assert sha256_file(tmp_path / "a.svg") == sha256_file(tmp_path / "b.svg")
        np.testing.assert_array_equal(a["val_loss"], b["val_loss"])

    def test_emit_all_kinds(self, tmp_path):
        paths = [_history(tmp_path)]
        b = sample_batch(MarketModel(), GRID, 4, np.random.default_rng(0))
        tr = fbsde.rollout(fbsde.zero_controls(GRID), G.constant(), MarketModel(), GRID, b)
        fbsde.write_trajectory_csv(tr, tmp_path / "trajectory.csv")
        paths.append(tmp_path / "trajectory.csv")
        (tmp_path / "other.csv").write_text("# schema: something/v9\nx\n1\n")
        paths.append(tmp_path / "other.csv")
        out = plots.emit_plots([str(p) for p in paths], str(tmp_path / "svg"))
        assert [p.split("/")[-1] for p in out] == ["h.svg", "trajectory.svg"]


class TestEmptyAndMalformed:
    def test_empty_trajectory_warns(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("# schema: graphon_fbsde.trajectory/v1\nparticle,label,t,X,Y,Z,pi,mean_field\n")
        with pytest.warns(plots.EmptyDataWarning):
            data = plots.plot_y_paths(p, tmp_path / "t.svg")
        assert (tmp_path / "t.svg").exists()
        assert data["Y"].size == 0

    def test_malformed_line_number(self, tmp_path):
        p = tmp_path / "h.csv"
        p.write_text("# schema: graphon_fbsde.train_history/v1\n"
                     "iteration,train_loss,val_loss,val_rel_error\n"
                     "1,0.5,0.4,\n"
                     "2,oops,0.3,\n")
        with pytest.raises(CsvParseError) as info:
            plots.plot_history(p, tmp_path / "h.svg")
        assert info.value.line == 4

    def test_wrong_field_count(self, tmp_path):
        p = tmp_path / "u.csv"
        p.write_text("# schema: graphon_fbsde.utilities/v1\nlabel,Y0,utility\n0.1,1.0\n")
        with pytest.raises(CsvParseError) as info:
            read_csv(p)
        assert info.value.line == 3

    def test_missing_schema(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("label,Y0,utility\n")
        with pytest.raises(CsvParseError) as info:
            read_csv(p)
        assert info.value.line == 1

    def test_wrong_schema(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("# schema: graphon_fbsde.utilities/v1\nlabel,Y0,utility\n")
        with pytest.raises(CsvParseError):
            plots.plot_history(p, tmp_path / "x.svg")


class TestContent:
    def test_two_block_bundles_separate(self, tmp_path):
        model = MarketModel()
        g = G.two_block(2.0, 0.5)
        b = sample_batch(model, GRID, 16, np.random.default_rng(0), labels=label_grid(16))
        tr = oracle_trajectory(ClosedFormParams.from_model(model, GRID, g), GRID, b)
        p = tmp_path / "y.csv"
        fbsde.write_trajectory_csv(tr, p)
        data = plots.plot_y_paths(p, tmp_path / "y.svg")
        low = data["Y"][data["labels"] < 0.5, 0]
        high = data["Y"][data["labels"] >= 0.5, 0]
        np.testing.assert_allclose(low.mean(), 1.5, atol=1e-12)
        np.testing.assert_allclose(high.mean(), -0.75, atol=1e-12)

    def test_confidence_band(self, tmp_path):
        paths = [_history(tmp_path, f"h{s}.csv", s) for s in range(3)]
        data = plots.plot_confidence_band(paths, tmp_path / "band.svg")
        assert data["mean"].shape == data["half_width"].shape == (4,)
        assert np.all(data["half_width"] >= 0)
