"""Config loading, sampling, verdicts, sweeps, reports, and the CLI contract."""

import dataclasses
import json
from pathlib import Path

import pytest

from polyharm import residuals
from polyharm.cli import main
from polyharm.errors import AdmissibleRegionError, ConfigError
from polyharm.mobius import ConformalInstance, MobiusMap
from polyharm.rationals import EXACT, FLOAT, rational
from polyharm.spaceform import SpaceFormModel
from polyharm.verifier import (
    ResidualReport,
    SamplePlan,
    check_report_body,
    emit_report,
    expected_polyharmonic_zero,
    expected_proper_biharmonic,
    load_config,
    render_report,
    run_check,
    sample_points,
    selftest,
    sweep_biharmonic,
    sweep_polyharmonic,
)

GOLDEN = Path(__file__).parent / "golden"


def _zeros(m):
    return ["0"] * m


def _inversion_config(m=4, expect=None, seed=5, count=6):
    cfg = {
        "domain": {"model": "flat", "dim": m},
        "target": {"model": "flat", "dim": m},
        "map": {
            "a": _zeros(m),
            "b": _zeros(m),
            "k": "1",
            "A": {"kind": "identity"},
            "epsilon": 2,
        },
        "sample": {"seed": seed, "count": count, "radius": "2"},
    }
    if expect:
        cfg["expect"] = expect
    return cfg


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


class TestLoadConfig:
    def test_single_instance(self, tmp_path):
        configured, plan = load_config(_write(tmp_path, _inversion_config()))
        assert len(configured) == 1
        inst = configured[0].instance
        assert inst.domain.name == "flat" and inst.map.epsilon == 2
        assert plan.seed == 5 and plan.count == 6

    def test_epsilon_one_rejected(self, tmp_path):
        cfg = _inversion_config()
        cfg["map"]["epsilon"] = 1
        with pytest.raises(ConfigError):
            load_config(_write(tmp_path, cfg))

    def test_unit_b_hyperbolic_target_rejected(self, tmp_path):
        cfg = _inversion_config()
        cfg["target"] = {"model": "hyperbolic", "dim": 4}
        cfg["map"]["b"] = ["1", "0", "0", "0"]
        with pytest.raises(ConfigError):
            load_config(_write(tmp_path, cfg))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.json")

    def test_instances_list_with_matrix_kinds(self, tmp_path):
        base = _inversion_config()
        perm = _inversion_config()
        perm["map"]["A"] = {"kind": "permutation", "data": {"perm": [1, 0, 2, 3], "signs": [1, -1, 1, 1]}}
        cay = _inversion_config()
        cay["map"]["A"] = {
            "kind": "cayley",
            "data": [
                ["0", "1/2", "0", "0"],
                ["-1/2", "0", "0", "0"],
                ["0", "0", "0", "0"],
                ["0", "0", "0", "0"],
            ],
        }
        doc = {"instances": [base, perm, cay], "sample": {"seed": 1, "count": 3}}
        configured, plan = load_config(_write(tmp_path, doc))
        assert len(configured) == 3

    def test_bad_rational_rejected(self, tmp_path):
        cfg = _inversion_config()
        cfg["map"]["k"] = "1/0"
        with pytest.raises(ConfigError):
            load_config(_write(tmp_path, cfg))


class TestSampling:
    def _instance(self, m=4):
        return ConformalInstance(
            SpaceFormModel.flat(m), SpaceFormModel.flat(m), MobiusMap.inversion(m)
        )

    def test_deterministic(self):
        inst = self._instance()
        plan = SamplePlan(seed=9, count=8)
        assert sample_points(plan, inst) == sample_points(plan, inst)

    def test_exclusion_zone_respected(self):
        inst = self._instance()
        plan = SamplePlan(seed=2, count=12, exclusion=rational(1, 2))
        for pt in sample_points(plan, inst):
            assert sum(v * v for v in pt) > rational(1, 4)

    def test_hyperbolic_domain_stays_in_ball(self):
        inst = ConformalInstance(
            SpaceFormModel.hyperbolic(3),
            SpaceFormModel.flat(3),
            MobiusMap.inversion(3),
        )
        for pt in sample_points(SamplePlan(seed=3, count=10), inst):
            assert sum(v * v for v in pt) < 1

    def test_explicit_points_validated(self):
        inst = self._instance()
        good = SamplePlan(points=((rational(1), 0, 0, 0),))
        assert sample_points(good, inst) == [(rational(1), 0, 0, 0)]
        bad = SamplePlan(points=((rational(0), 0, 0, 0),))
        with pytest.raises(AdmissibleRegionError):
            sample_points(bad, inst)

    def test_starved_region_raises(self):
        # unit b on a flat->hyperbolic instance leaves lambda <= 0 everywhere
        inst = ConformalInstance(
            SpaceFormModel.flat(3),
            SpaceFormModel.hyperbolic(3),
            MobiusMap.build(a=[0, 0, 0], b=[0, 0, 0], k=50, epsilon=0),
        )
        with pytest.raises(AdmissibleRegionError):
            sample_points(SamplePlan(seed=1, count=4, radius=rational(1, 8)), inst)


class TestRunCheck:
    def test_inversion_m4_proper_biharmonic(self):
        inst = ConformalInstance(
            SpaceFormModel.flat(4), SpaceFormModel.flat(4), MobiusMap.inversion(4)
        )
        out = run_check(inst, SamplePlan(seed=1, count=6))
        assert out["verdict"] == "proper-biharmonic"
        assert not out["warnings"]

    def test_sphere_to_sphere_not_biharmonic(self):
        mmap = MobiusMap.build(a=[0, 0, 0, 0, 0], b=[0, 0, 0, 0, 0], k="1/2", epsilon=2)
        inst = ConformalInstance(SpaceFormModel.sphere(5), SpaceFormModel.sphere(5), mmap)
        out = run_check(inst, SamplePlan(seed=1, count=6))
        assert out["verdict"] == "not-biharmonic"

    def test_affine_flat_map_harmonic(self):
        mmap = MobiusMap.build(a=[0, 0, 0, 0], b=[1, 0, 0, 0], k=2, epsilon=0)
        inst = ConformalInstance(SpaceFormModel.flat(4), SpaceFormModel.flat(4), mmap)
        out = run_check(inst, SamplePlan(seed=1, count=4))
        assert out["verdict"] == "harmonic"

    def test_expectation_mismatch_recorded(self):
        inst = ConformalInstance(
            SpaceFormModel.flat(5), SpaceFormModel.flat(5), MobiusMap.inversion(5)
        )
        out = run_check(inst, SamplePlan(seed=1, count=4), expect="proper-biharmonic")
        assert out["verdict"] == "not-biharmonic" and out["match"] is False


class TestSweeps:
    def test_biharmonic_small_window_matches_golden(self):
        body = sweep_biharmonic(m_values=(3, 4), trials=1, points=3, seed=4)
        golden = {
            (c["m"], c["c1"], c["c2"], c["epsilon"]): c
            for c in json.loads((GOLDEN / "biharmonic_truth_table.json").read_text())
        }
        assert body["all_match"]
        for cell in body["cells"]:
            g = golden[(cell["m"], cell["c1"], cell["c2"], cell["epsilon"])]
            assert cell["expected_proper"] == g["proper_biharmonic"]
            proper = all(t["proper"] for t in cell["trials"])
            assert proper == g["proper_biharmonic"]
            if "verdict" in g:
                assert cell["verdict"] == g["verdict"]

    def test_expected_proper_rule_against_golden(self):
        for c in json.loads((GOLDEN / "biharmonic_truth_table.json").read_text()):
            assert (
                expected_proper_biharmonic(c["m"], c["c1"], c["c2"], c["epsilon"])
                == c["proper_biharmonic"]
            )

    def test_affine_flat_cell_is_harmonic_not_proper(self):
        body = sweep_biharmonic(m_values=(4,), pairs=((0, 0),), eps_values=(0,), trials=2, points=3)
        (cell,) = body["cells"]
        assert cell["verdict"] == "harmonic" and not cell["expected_proper"] and cell["match"]

    def test_curved_domain_m4_not_proper(self):
        body = sweep_biharmonic(m_values=(4,), pairs=((1, 1), (1, 0)), eps_values=(2,), trials=1, points=3)
        for cell in body["cells"]:
            assert not cell["expected_proper"] and cell["match"]

    def test_polyharmonic_window_matches_golden(self):
        body = sweep_polyharmonic(orders=(1, 2, 3), m_values=(3, 4, 5, 6), seed=1)
        golden = {
            (c["order"], c["m"]): c
            for c in json.loads((GOLDEN / "polyharmonic_truth_table.json").read_text())
        }
        assert body["all_match"]
        for cell in body["cells"]:
            g = golden[(cell["order"], cell["m"])]
            assert cell["expected_zero"] == g["zero"]
            assert cell["expected_proper"] == g["proper"]
            t = cell["trials"][0]
            assert t["zero"] == g["zero"] and t["proper"] == g["proper"]
            assert t["closed_form_match"]

    def test_expected_zero_rule_against_golden(self):
        for c in json.loads((GOLDEN / "polyharmonic_truth_table.json").read_text()):
            assert expected_polyharmonic_zero(c["m"], c["order"]) == c["zero"]

    def test_odd_dimensions_never_vanish(self):
        body = sweep_polyharmonic(orders=(2, 4), m_values=(3, 5, 7), seed=2)
        for cell in body["cells"]:
            assert not cell["trials"][0]["zero"] and cell["match"]


class TestSelftest:
    def test_passes_in_exact_mode(self):
        body = selftest()
        assert body["all_ok"], body

    def test_sign_mutation_detected(self, monkeypatch):
        # flip the energy-gradient term of the second necessary condition; the
        # identity chain battery must catch it
        original = residuals._nd2_from_geometry

        def mutated(g, mode, tol):
            rv = original(g, mode, tol)
            m = g.m
            gb_gnorm = g.gradbar(g.grad_gnorm)
            flipped = tuple(
                v - 2 * (m - 4) * t for v, t in zip(rv.values, gb_gnorm)
            )
            return dataclasses.replace(rv, values=flipped)

        monkeypatch.setattr(residuals, "_nd2_from_geometry", mutated)
        body = selftest()
        failed = {c["name"] for c in body["checks"] if not c["ok"]}
        assert "residual-identity-chain" in failed

    def test_float_tolerance_misuse_flagged(self):
        body = selftest(mode=FLOAT, tol=1e-15)
        failed = {c["name"] for c in body["checks"] if not c["ok"]}
        assert "float-separation" in failed

    def test_float_mode_passes_with_default_tolerance(self):
        body = selftest(mode=FLOAT)
        assert body["all_ok"], body


class TestReports:
    def _report(self, seed=3):
        inst = ConformalInstance(
            SpaceFormModel.flat(4), SpaceFormModel.flat(4), MobiusMap.inversion(4)
        )
        from polyharm.verifier import ConfiguredInstance

        body = check_report_body([ConfiguredInstance(inst, "proper-biharmonic")], SamplePlan(seed=seed, count=4))
        return ResidualReport(
            kind="check", mode=EXACT, seed=seed, body=body, exit_code=0 if body["all_match"] else 1
        )

    def test_json_validates_against_shipped_schema(self):
        import jsonschema
        import polyharm

        schema = json.loads(
            (Path(polyharm.__file__).parent / "schemas" / "report.schema.json").read_text()
        )
        report = self._report()
        jsonschema.validate(json.loads(render_report(report, "json")), schema)
        bh = sweep_biharmonic(m_values=(4,), pairs=((0, 0),), eps_values=(2,), trials=1, points=3)
        rep = ResidualReport(kind="sweep-biharmonic", mode=EXACT, seed=0, body=bh, exit_code=0)
        jsonschema.validate(json.loads(render_report(rep, "json")), schema)
        st = ResidualReport(kind="selftest", mode=EXACT, seed=None, body=selftest(), exit_code=0)
        jsonschema.validate(json.loads(render_report(st, "json")), schema)

    def test_byte_identical_across_runs(self, tmp_path):
        a = emit_report(self._report(), "json", tmp_path / "a.json")
        b = emit_report(self._report(), "json", tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
        assert a == b

    def test_csv_has_row_per_point(self):
        text = render_report(self._report(), "csv")
        lines = [l for l in text.strip().splitlines()]
        assert len(lines) == 1 + 4  # header + one row per sampled point

    def test_timing_never_serialized(self):
        rep = self._report()
        rep.timing = 123.456
        assert "123.456" not in render_report(rep, "json")
        assert "timing" not in json.loads(render_report(rep, "json"))


class TestCli:
    def test_check_exit_zero_and_report_file(self, tmp_path, capsys):
        cfg = _write(tmp_path, _inversion_config(expect="proper-biharmonic"))
        out = tmp_path / "report.json"
        code = main(["check", str(cfg), "--out", str(out)])
        assert code == 0 and out.is_file()
        doc = json.loads(out.read_text())
        assert doc["kind"] == "check" and doc["all_match"]

    def test_verdict_mismatch_exits_one(self, tmp_path, capsys):
        cfg = _write(tmp_path, _inversion_config(m=5, expect="proper-biharmonic"))
        assert main(["check", str(cfg)]) == 1

    def test_config_error_exits_two(self, tmp_path, capsys):
        cfg = _inversion_config()
        cfg["map"]["epsilon"] = 1
        assert main(["check", str(_write(tmp_path, cfg))]) == 2

    def test_tol_requires_float_mode(self, tmp_path, capsys):
        cfg = _write(tmp_path, _inversion_config())
        assert main(["check", str(cfg), "--tol", "1e-9"]) == 2

    def test_out_dir_env_var(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("POLYHARM_OUT_DIR", str(tmp_path / "reports"))
        cfg = _write(tmp_path, _inversion_config())
        assert main(["check", str(cfg), "--out", "r.json"]) == 0
        assert (tmp_path / "reports" / "r.json").is_file()

    def test_selftest_subcommand(self, capsys):
        assert main(["selftest", "--format", "table"]) == 0
        assert "all" not in capsys.readouterr().err

    def test_small_sweep_subcommand(self, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        code = main(
            [
                "sweep-biharmonic",
                "--m-min", "4", "--m-max", "4",
                "--trials", "1", "--points", "3",
                "--out", str(out), "--format", "csv",
            ]
        )
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 1 + 18  # 9 curvature pairs x 2 branches

    def test_identical_seeds_identical_bytes(self, tmp_path, capsys):
        cfg = _write(tmp_path, _inversion_config())
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert main(["check", str(cfg), "--seed", "12", "--out", str(a)]) == 0
        assert main(["check", str(cfg), "--seed", "12", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
