import copy
import dataclasses
import json

import numpy as np
import pytest

from builders import make_scenario
from nashseek.analysis import report_text, theorem_verdict
from nashseek.control import Law, Smoothed
from nashseek.errors import InputError, OutputError, ParseError, ValidationError
from nashseek.files import atomic_write_text
from nashseek.io import (
    apply_overrides,
    dump_scenario,
    git_blob_sha1,
    load_scenario,
    loadable_dict,
    parse_json,
    read_trace,
    scenario_from_dict,
    scenario_to_dict,
    trace_csv,
    write_trace,
)
from nashseek.plant import DisturbanceSpec, PiecewiseConstantRandom
from nashseek.sim import integrate
from nashseek.suites import BUNDLED, bundled_path, load_bundled


def bundled_doc(name):
    return json.loads(bundled_path(name).read_text())


def problem_paths(doc, **kw):
    with pytest.raises(ValidationError) as err:
        scenario_from_dict(doc, **kw)
    return [p for p, _ in err.value.problems]


@pytest.mark.parametrize("name", sorted(BUNDLED))
def test_bundled_scenarios_load(name):
    f = load_bundled(name)
    assert f.scenario.name == bundled_doc(name)["name"]


def test_parse_error_reports_line_and_column():
    with pytest.raises(ParseError) as err:
        parse_json('{\n  "a": 1,\n  "b": ]\n}')
    assert (err.value.line, err.value.column) == (3, 8)


def test_unknown_fields_rejected_with_paths():
    doc = bundled_doc("theorem3")
    doc["controller"]["gain"] = 1.0
    doc["plants"][1]["colour"] = "red"
    doc["extra"] = True
    paths = problem_paths(doc)
    assert {"/controller/gain", "/plants/1/colour", "/extra"} <= set(paths)


def test_missing_and_mistyped_fields():
    doc = bundled_doc("theorem2")
    del doc["game"]["M"]
    doc["integration"]["h"] = "small"
    doc["controller"]["law"] = "Magic"
    paths = problem_paths(doc)
    assert {"/game/M", "/integration/h", "/controller/law"} <= set(paths)


def test_schema_version_checked():
    doc = bundled_doc("theorem1")
    doc["schema_version"] = 2
    assert problem_paths(doc) == ["/schema_version"]


def test_nonpositive_delta_names_controller_delta():
    doc = bundled_doc("theorem2")
    doc["controller"]["delta"] = 0.0
    assert "/controller/delta" in problem_paths(doc)
    assert scenario_from_dict(doc, allow_zero_delta=True).scenario.controller.delta == 0.0


def test_nonsymmetric_own_block_rejected():
    doc = bundled_doc("theorem1")
    doc["game"] = {"dims": [2], "M": [[2.0, 1.0], [0.0, 2.0]], "r": [0.0, 0.0]}
    assert "/game" in problem_paths(doc)


def test_switching_off_a_disturbance_ignores_its_parameters():
    doc = apply_overrides(bundled_doc("theorem4"), ["plants.0.disturbance.kind=None"])
    sc = scenario_from_dict(doc).scenario
    assert sc.plants[0].disturbance.is_zero
    assert not sc.plants[1].disturbance.is_zero


def test_overrides():
    doc = bundled_doc("theorem3")
    out = apply_overrides(doc, ["controller.delta=0.05", "plants.2.xi0=[1, 2]", "name=renamed",
                                "integration.method=Euler", "analysis.tol_ne=null"])
    assert out["controller"]["delta"] == 0.05
    assert out["plants"][2]["xi0"] == [1, 2]
    assert out["name"] == "renamed"
    assert out["integration"]["method"] == "Euler"
    assert out["analysis"]["tol_ne"] is None
    assert doc["controller"]["delta"] == 0.04


@pytest.mark.parametrize("bad", ["controller.delta", "plants.9.order=1", "plants.x.order=1",
                                 "name.first=1", "=3"])
def test_bad_overrides(bad):
    with pytest.raises(InputError):
        apply_overrides(bundled_doc("theorem3"), [bad])


@pytest.mark.parametrize("name", sorted(BUNDLED))
def test_resolved_document_round_trips(name):
    f = load_bundled(name)
    resolved = scenario_to_dict(f.scenario, f.analysis)
    again = scenario_from_dict(loadable_dict(resolved))
    assert scenario_to_dict(again.scenario, again.analysis) == resolved
    assert again.analysis == f.analysis


def test_resolved_document_shows_defaults():
    resolved = scenario_to_dict(load_bundled("theorem3").scenario)
    plant = resolved["plants"][0]
    assert plant["hurwitz_coeffs"] == [1.0]
    assert plant["resolved_poles"] == [[-1.0, 0.0]]
    assert resolved["controller"]["sign_mode"] == {"kind": "Exact"}
    assert resolved["controller"]["theta_hat0"] is None


def test_round_trip_with_random_disturbance_and_smoothing(tmp_path):
    sc = make_scenario(Law.DISTURBANCE, method="rk4", disturbed=True, sign_mode=Smoothed(0.01))
    plants = list(sc.plants)
    plants[0] = type(plants[0])(2, 1, plants[0].regressor, plants[0].theta,
                                DisturbanceSpec(PiecewiseConstantRandom(0.5, 2.0, seed=4)))
    sc = dataclasses.replace(sc, plants=tuple(plants))
    path = dump_scenario(sc, tmp_path / "s.json")
    back = load_scenario(path).scenario
    assert scenario_to_dict(back) == scenario_to_dict(sc)


def test_trace_round_trip_reproduces_report(tmp_path):
    f = load_bundled("theorem1")
    trace = integrate(f.scenario)
    csv_path, meta_path = write_trace(trace, tmp_path / "t1.csv", f.analysis)
    assert meta_path.name == "t1.json"
    meta = json.loads(meta_path.read_text())
    assert meta["content_hash"] == git_blob_sha1(csv_path.read_bytes())
    back = read_trace(csv_path)
    assert np.array_equal(back.states, trace.states)
    assert np.array_equal(back.t, trace.t)
    original = report_text([theorem_verdict(trace, config=f.analysis)])
    reread = report_text([theorem_verdict(back, config=f.analysis)])
    assert reread == original


def test_trace_header_and_tamper_detection(tmp_path):
    trace = integrate(make_scenario(Law.DISTURBANCE, horizon=0.5, h=1e-3, method="euler", disturbed=True,
                                    stride=50))
    header = trace_csv(trace).splitlines()[0].split(",")
    assert header[:4] == ["t", "sigma", "x_1_1", "d1x_1_1"]
    assert {"gh_1_1", "z_1_3_1", "th_2_2", "Dh_3", "u_1_1", "d_3_1", "V", "chatter_rate"} <= set(header)
    csv_path, _ = write_trace(trace, tmp_path / "t4.csv")
    csv_path.write_text(csv_path.read_text().replace("0.0", "0.5", 1))
    with pytest.raises(InputError):
        read_trace(csv_path)


def test_git_blob_hash_matches_git():
    assert git_blob_sha1(b"hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"


def test_atomic_write_reports_output_errors(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OutputError):
        atomic_write_text(blocker / "sub" / "out.txt", "data")
    p = atomic_write_text(tmp_path / "a" / "b.txt", "data")
    assert p.read_text() == "data"
    assert [q.name for q in p.parent.iterdir()] == ["b.txt"]


def test_load_scenario_missing_file(tmp_path):
    with pytest.raises(InputError):
        load_scenario(tmp_path / "none.json")


def test_overrides_do_not_touch_the_source_document():
    doc = bundled_doc("theorem2")
    before = copy.deepcopy(doc)
    apply_overrides(doc, ["controller.k=[2, 2, 2]"])
    assert doc == before
