import json

import numpy as np
import pytest

from photonstat.cli import main
from photonstat.ttag import read_ttag


def write_config(path, n_runs=3, duration_ms=100.0, seed=11, mode="ideal",
                 rate=5000.0, n_channels=2):
    cfg = {
        "source": {
            "profile": [[0, 0.0], [10_000_000, 0.0], [12_000_000, rate],
                        [duration_ms * 1e6, rate]],
            "duration_ns": int(duration_ms * 1e6),
        },
        "emission": {"mode": "ideal", "alpha_emitted": 120.0,
                     "dwell": {"kind": "fixed", "tau_ns": 12000.0}} if mode == "ideal" else
                    {"mode": "mcwf",
                     "two_level": {"gamma": 38138934.81458009,
                                   "omega": 87719550.0735342, "delta": 0.0, "s": 3.5},
                     "p_dark": 1 / 120, "max_dwell_ns": 100000.0},
        "detector": {"p_det": 0.009, "n_channels": n_channels,
                     "split_ratio": 0.5 if n_channels == 2 else 1.0,
                     "dark_rate_cps": 250.0, "dead_time_ns": 50,
                     "stray_rate_cps": 0.0},
        "run": {"n_runs": n_runs, "master_seed": seed, "duration_ms": duration_ms},
    }
    path.write_text(json.dumps(cfg))
    return path


class TestSimulate:
    def test_deterministic_across_invocations_and_threads(self, tmp_path):
        cfg = write_config(tmp_path / "c.cfg")
        outs = []
        for name, threads in [("a.ttag", 1), ("b.ttag", 1), ("c.ttag", 4)]:
            rc = main(["simulate", "--config", str(cfg), "--out", str(tmp_path / name),
                       "--seed", "7", "--threads", str(threads)])
            assert rc == 0
            outs.append((tmp_path / name).read_bytes())
        assert outs[0] == outs[1] == outs[2]

    def test_seed_changes_bytes(self, tmp_path):
        cfg = write_config(tmp_path / "c.cfg")
        main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a.ttag"), "--seed", "1"])
        main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "b.ttag"), "--seed", "2"])
        assert (tmp_path / "a.ttag").read_bytes() != (tmp_path / "b.ttag").read_bytes()

    def test_env_seed_fallback(self, tmp_path, monkeypatch):
        cfg = write_config(tmp_path / "c.cfg")
        monkeypatch.setenv("PHOTONSTAT_SEED", "7")
        main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "env.ttag")])
        monkeypatch.delenv("PHOTONSTAT_SEED")
        main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "cli.ttag"),
              "--seed", "7"])
        assert (tmp_path / "env.ttag").read_bytes() == (tmp_path / "cli.ttag").read_bytes()

    def test_manifest_written(self, tmp_path):
        cfg = write_config(tmp_path / "c.cfg")
        main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a.ttag"), "--seed", "3"])
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["seed"] == 3
        assert len(manifest["config_sha256"]) == 64
        assert "photonstat" in manifest["versions"]

    def test_invalid_config_exits_2(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text(json.dumps({"source": {"profile": [[0, -1.0]], "duration_ns": 100},
                                 "emission": {"mode": "ideal", "alpha_emitted": 120.0,
                                              "dwell": {"kind": "fixed", "tau_ns": 1.0}},
                                 "detector": {"p_det": 2.0, "n_channels": 2,
                                              "split_ratio": 0.5, "dark_rate_cps": 0,
                                              "dead_time_ns": 0, "stray_rate_cps": 0},
                                 "run": {"n_runs": 1, "master_seed": 0, "duration_ms": 1.0}}))
        assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "x.ttag")]) == 2

    def test_unknown_flag_exits_2(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--frobnicate"])
        assert exc.value.code == 2


class TestTheoryCommands:
    def test_g2_curve_starts_at_zero(self, tmp_path):
        out = tmp_path / "g2.csv"
        rc = main(["theory", "g2", "--omega-over-gamma", "2.3", "--out", str(out)])
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "lag_ns,g2"
        first = lines[1].split(",")
        assert float(first[0]) == 0.0
        assert float(first[1]) == 0.0
        # decorrelates toward 1
        last = lines[-1].split(",")
        assert float(last[1]) == pytest.approx(1.0, abs=0.05)

    def test_bounds_curve(self, tmp_path):
        out = tmp_path / "bounds.csv"
        assert main(["theory", "bounds", "--alpha", "1.08", "--out", str(out)]) == 0
        rows = np.genfromtxt(out, delimiter=",", names=True)
        assert rows["g2_bound_flux"][0] == pytest.approx(0.0, abs=1e-3)
        assert rows["g2_bound_flux"][-1] == pytest.approx(1.0, abs=0.02)

    def test_rates_json(self, tmp_path):
        out = tmp_path / "rates.json"
        assert main(["theory", "rates", "--s", "3.5", "--alpha", "1.08",
                     "--p-det", "0.009", "--out", str(out)]) == 0
        d = json.loads(out.read_text())
        assert d["excited_population_ss"] == pytest.approx(3.5 / 9)
        assert d["scattering_rate_per_s"] == pytest.approx(1.483e7, rel=1e-3)
        assert d["p_detection"] == pytest.approx(0.660, abs=5e-4)
        assert d["scattered_photons_per_atom"] == pytest.approx(120.0)


class TestAnalyze:
    @pytest.fixture()
    def tagfile(self, tmp_path):
        cfg = write_config(tmp_path / "c.cfg", n_runs=40, duration_ms=100.0, rate=8000.0)
        out = tmp_path / "tags.ttag"
        assert main(["simulate", "--config", str(cfg), "--out", str(out), "--seed", "5"]) == 0
        return out

    def test_stats(self, tmp_path, tagfile):
        out = tmp_path / "stats"
        rc = main(["analyze", "stats", "--in", str(tagfile), "--out", str(out),
                   "--bin-us", "200", "--background-ms", "0:10", "--boot", "60"])
        assert rc == 0
        fano = (out / "fano.csv").read_text().splitlines()
        assert fano[0] == "t_ms,mean,variance,ratio,ratio_lo,ratio_hi"
        alpha = json.loads((out / "alpha.json").read_text())
        # 120 emitted at p_det 0.009 -> alpha ~ 1.08, generous window at 40 runs
        assert 0.8 < alpha["alpha"] < 1.4
        assert "p_detection" in alpha

    def test_tia(self, tmp_path, tagfile):
        out = tmp_path / "tia"
        rc = main(["analyze", "tia", "--in", str(tagfile), "--out", str(out),
                   "--bin-ns", "4000"])
        assert rc == 0
        fit = json.loads((out / "tia_fit.json").read_text())
        assert fit["n_intervals"] > 100
        assert len(fit["components"]) in (1, 2)

    def test_g2zero(self, tmp_path, tagfile):
        out = tmp_path / "gz"
        rc = main(["analyze", "g2zero", "--in", str(tagfile), "--out", str(out),
                   "--window-ms", "50", "--coinc-window-ns", "100",
                   "--alpha", "1.08", "--dwell-us", "12"])
        assert rc == 0
        header = (out / "g2zero.csv").read_text().splitlines()[0]
        assert header.startswith("t_lo_ms,t_hi_ms,g2,sigma,mean_atoms,overlay,usable")

    def test_single_channel_g2_rejected(self, tmp_path):
        cfg = write_config(tmp_path / "c1.cfg", n_channels=1)
        tags = tmp_path / "one.ttag"
        main(["simulate", "--config", str(cfg), "--out", str(tags), "--seed", "5"])
        assert main(["analyze", "g2", "--in", str(tags), "--out", str(tmp_path / "g")]) == 2


class TestImport:
    def test_round_trip_through_csv(self, tmp_path):
        csv_path = tmp_path / "t.csv"
        csv_path.write_text("run,channel,time\n0,0,100\n0,1,250\n1,0,50\n")
        out = tmp_path / "t.ttag"
        assert main(["import", "--in", str(csv_path), "--out", str(out)]) == 0
        s = read_ttag(out)
        assert len(s) == 3
        assert s.n_runs == 2


class TestReport:
    def test_emits_figure_files(self, tmp_path):
        cfg = write_config(tmp_path / "c.cfg", n_runs=8, duration_ms=100.0,
                           seed=3, mode="mcwf", rate=20_000.0)
        out = tmp_path / "report"
        rc = main(["report", "--config", str(cfg), "--out", str(out), "--seed", "9"])
        assert rc == 0
        for name in ["fig2_fano.csv", "fig3_tia.csv", "fig4a_g2.csv",
                     "fig4b_g2zero.csv", "summary.json", "manifest.json"]:
            assert (out / name).exists(), name
        summary = json.loads((out / "summary.json").read_text())
        assert "alpha_fit" in summary
        assert summary["alpha_fit"] is None or "p_detection" in summary["alpha_fit"]

    def test_report_deterministic(self, tmp_path):
        cfg = write_config(tmp_path / "c.cfg", n_runs=4, duration_ms=60.0,
                           seed=3, rate=10_000.0)
        for sub in ("r1", "r2"):
            assert main(["report", "--config", str(cfg), "--out", str(tmp_path / sub),
                         "--seed", "21"]) == 0
        s1 = (tmp_path / "r1" / "summary.json").read_bytes()
        s2 = (tmp_path / "r2" / "summary.json").read_bytes()
        assert s1 == s2
