import json

import numpy as np
import pytest

import causalfield.io as cfio
from causalfield.errors import ConfigError
from causalfield.geometry import Region
from causalfield.grid import Box, LatticeField, LatticeSpec
from causalfield.harness.fixtures import box_perturbation, source, window_1p1


@pytest.fixture
def spec():
    return window_1p1(24, 64)


class TestContainers:
    def test_field_roundtrip(self, tmp_path, spec, rng):
        f = source(spec, 6, 10, 30, 40, 0.8)
        path = tmp_path / "field.cff"
        cfio.write_field(path, f)
        back = cfio.read_field(path)
        assert back.lattice == spec
        assert np.array_equal(back.data, f.data)
        assert back.support == f.support

    def test_perturbation_roundtrip(self, tmp_path, spec):
        pert = box_perturbation(spec, 8, 14, 28, 44, 0.12, 0.1, 0.15, 0.3)
        path = tmp_path / "pert.cfp"
        cfio.write_perturbation(path, pert)
        back = cfio.read_perturbation(path)
        assert np.array_equal(back.p00, pert.p00)
        assert np.array_equal(back.pvec, pert.pvec)
        assert np.array_equal(back.pupper, pert.pupper)
        assert np.array_equal(back.q, pert.q)
        # header records the admissibility class
        import struct
        with open(path, "rb") as fh:
            (hlen,) = struct.unpack("<I", fh.read(4))
            header = json.loads(fh.read(hlen))
        assert header["admissible"] is True
        assert 0 < header["epsilon"] <= 1

    def test_region_roundtrip_bitpacked(self, tmp_path, spec, rng):
        mask = rng.random(spec.shape) < 0.2
        region = Region(spec, mask)
        path = tmp_path / "region.cfr"
        cfio.write_region(path, region)
        back = cfio.read_region(path)
        assert np.array_equal(back.mask, region.mask)
        # bit packing: payload is 8x smaller than a byte mask
        raw = path.stat().st_size
        assert raw < mask.size

    def test_wrong_kind_rejected(self, tmp_path, spec):
        f = source(spec, 6, 10, 30, 40)
        path = tmp_path / "field.cff"
        cfio.write_field(path, f)
        with pytest.raises(ConfigError):
            cfio.read_perturbation(path)

    def test_bad_json_config(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{ not json }")
        with pytest.raises(ConfigError) as err:
            cfio.load_json(path)
        assert ":1:" in str(err.value)   # line/column in the message


class TestPhaseLog:
    def test_jsonl_roundtrip(self, tmp_path):
        path = tmp_path / "phases.jsonl"
        cfio.append_phase_log(path, "N|P,Q", 0.99 + 0.01j, 1e-7,
                              {"M": 16, "n_max": 6})
        cfio.append_phase_log(path, "N|Q,P", 0.98 - 0.02j, 2e-7,
                              {"M": 16, "n_max": 6})
        rows = cfio.read_phase_log(path)
        assert len(rows) == 2
        assert rows[0]["triple"] == "N|P,Q"
        assert rows[1]["alpha_im"] == -0.02
        assert rows[0]["cutoffs"]["M"] == 16


class TestSolverConfig:
    def test_parse(self):
        cfg = {"window": {"shape": [24, 64], "m": 1.0, "c_max": 2.0},
               "dx": 0.25, "dt": 0.08, "tol": 1e-8, "refinement_levels": 2}
        out = cfio.parse_solver_config(cfg)
        assert out["lattice"].shape == (24, 64)
        assert out["tol"] == 1e-8
        assert out["refinement_levels"] == 2

    def test_missing_key(self):
        with pytest.raises(ConfigError):
            cfio.parse_solver_config({"dx": 0.25})


class TestFactorizationScenarioFile:
    def test_load_and_run(self, tmp_path):
        from causalfield.geometry import Region, relation
        from causalfield.scattering import factorization_defect

        spec = window_1p1()
        P = box_perturbation(spec, 26, 34, 70, 86, 0.12, 0.1, 0.15, 0.3)
        Q = box_perturbation(spec, 10, 16, 66, 82, 0.14, 0.0, 0.17, 0.35)
        cfio.write_perturbation(tmp_path / "P.cfp", P)
        cfio.write_perturbation(tmp_path / "Q.cfp", Q)
        cfio.write_field(tmp_path / "probe.cff", source(spec, 4, 8, 70, 80))
        scenario = {
            "P": "P.cfp", "Q": "Q.cfp",
            "expected_relation": "succeeds",
            "probes": ["probe.cff"],
            "tolerances": {"defect": 1e-5},
        }
        sfile = tmp_path / "scenario.json"
        sfile.write_text(json.dumps(scenario))
        sc = cfio.load_factorization_scenario(sfile)
        got = relation(Region.of_support(sc["P"]),
                       Region.of_support(sc["Q"]), 1.0)
        assert got == sc["expected_relation"]
        d = factorization_defect(sc["P"].lattice, sc["P"], sc["Q"], sc["N"],
                                 sc["probes"])
        assert d <= sc["tolerances"]["defect"]

    def test_probeless_scenario_rejected(self, tmp_path):
        sfile = tmp_path / "scenario.json"
        sfile.write_text(json.dumps({"P": None, "Q": None, "probes": []}))
        with pytest.raises(ConfigError):
            cfio.load_factorization_scenario(sfile)
