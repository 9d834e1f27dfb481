"""Plan document serialization: canonical text, lossless round trips."""

import json
import math

import numpy as np
import pytest

from seqtest.conflimits import ApproxLimits, ChernoffLimits, ExactLimits
from seqtest.errors import PlanDocumentError
from seqtest.models import Bernoulli, Poisson
from seqtest.plandoc import (SCHEMA_VERSION, doc_to_plan, dump_doc, load_plan,
                             parse_doc, plan_to_doc, save_plan)
from seqtest.plans import (build_multihyp_plan, build_one_sided_plan,
                           decision_variable, run_plan)
from seqtest.ocexact import oc_single
from seqtest.twoprop import build_two_prop_plan, exact_oc, run_two_prop


def plan_zoo():
    return {
        "one-sided-exact": build_one_sided_plan(
            Bernoulli(), ExactLimits(), 0.4, 0.6, 0.05, 0.05, 0.5, stages=5),
        "multi-chernoff": build_multihyp_plan(
            Bernoulli(), ChernoffLimits(), [0.15, 0.55], [0.35, 0.75], 0.5,
            [0.1, 0.1], stages=2),
        "poisson": build_one_sided_plan(
            Poisson(), ExactLimits(), 3.0, 5.0, 0.05, 0.05, 0.5, stages=3),
        "two-prop": build_two_prop_plan([-0.3], [0.3], 0.5, stage_ns=[4, 8]),
        "approx-width": build_one_sided_plan(
            Bernoulli(), ApproxLimits(0.3), 0.4, 0.6, 0.05, 0.05, 0.5,
            stages=4),
    }


class TestRoundTrip:
    def test_byte_identical_cycle(self):
        for name, plan in plan_zoo().items():
            text = dump_doc(plan_to_doc(plan))
            again = dump_doc(plan_to_doc(doc_to_plan(parse_doc(text))))
            assert text == again, name
            assert text.endswith("\n")
            assert "\r" not in text

    def test_canonical_text_shape(self):
        text = dump_doc(plan_to_doc(plan_zoo()["one-sided-exact"]))
        doc = json.loads(text)
        assert doc["schema"] == SCHEMA_VERSION
        assert doc["kind"] == "one-sided"
        # canonical form: sorted keys, two-space indent
        assert text == json.dumps(doc, sort_keys=True, indent=2) + "\n"

    def test_infinite_edges_as_strings(self):
        plans = plan_zoo()
        text = dump_doc(plan_to_doc(plans["one-sided-exact"]))
        assert '"-inf"' in text or '"inf"' in text
        assert "Infinity" not in text
        loaded = doc_to_plan(parse_doc(text))
        edges = [x for st in loaded.stages for x in st.f + st.g]
        assert any(math.isinf(x) for x in edges)
        # the unbounded top window of the counting model stores a null
        ptext = dump_doc(plan_to_doc(plans["poisson"]))
        assert "null" in ptext

    def test_provenance_block(self):
        from seqtest import __version__
        doc = plan_to_doc(plan_zoo()["multi-chernoff"],
                          build={"stages": 2, "schedule": "geometric"},
                          tuning={"iterations": 7})
        assert doc["provenance"] == {"tool": "seqtest",
                                     "tool_version": __version__,
                                     "tuning": {"iterations": 7}}
        assert doc["build"] == {"stages": 2, "schedule": "geometric"}
        # provenance is carried, not validated: the cycle keeps it
        text = dump_doc(doc)
        assert dump_doc(plan_to_doc(doc_to_plan(parse_doc(text)),
                                    build=doc["build"],
                                    tuning={"iterations": 7})) == text


class TestBehaviorEquality:
    def test_one_sided_runs_identically(self):
        plan = plan_zoo()["one-sided-exact"]
        loaded = doc_to_plan(parse_doc(dump_doc(plan_to_doc(plan))))
        rng = np.random.default_rng(31)
        for _ in range(100):
            stream = (rng.uniform(size=plan.sample_cap) < 0.5).astype(int)
            assert run_plan(loaded, iter(stream.tolist())) == run_plan(
                plan, iter(stream.tolist()))
        a = oc_single(plan, 0.47)
        b = oc_single(loaded, 0.47)
        assert np.array_equal(a[0], b[0]) and a[1] == b[1]

    def test_multi_decisions_identical(self):
        plan = plan_zoo()["multi-chernoff"]
        loaded = doc_to_plan(parse_doc(dump_doc(plan_to_doc(plan))))
        for stage in range(1, plan.s + 1):
            n = plan.stages[stage - 1].n
            for k in range(n + 1):
                assert decision_variable(loaded, stage, k / n) == \
                    decision_variable(plan, stage, k / n)

    def test_two_prop_runs_identically(self):
        plan = plan_zoo()["two-prop"]
        loaded = doc_to_plan(parse_doc(dump_doc(plan_to_doc(plan))))
        rng = np.random.default_rng(8)
        for _ in range(50):
            xs = (rng.uniform(size=8) < 0.6).astype(int).tolist()
            ys = (rng.uniform(size=8) < 0.4).astype(int).tolist()
            assert run_two_prop(loaded, xs, ys) == run_two_prop(plan, xs, ys)
        a = exact_oc(plan, 0.55, 0.3)
        b = exact_oc(loaded, 0.55, 0.3)
        assert np.array_equal(a[0], b[0]) and a[1:] == b[1:]


class TestFileForms:
    def test_save_then_load(self, tmp_path):
        plan = plan_zoo()["one-sided-exact"]
        path = tmp_path / "plan.json"
        save_plan(plan, path, build={"stages": 5})
        loaded, doc = load_plan(path)
        assert doc["build"] == {"stages": 5}
        assert dump_doc(plan_to_doc(loaded)) == dump_doc(plan_to_doc(plan))
        raw = path.read_bytes()
        assert raw.endswith(b"\n") and b"\r" not in raw


class TestMalformedDocuments:
    def good_doc(self, name="one-sided-exact"):
        return plan_to_doc(plan_zoo()[name])

    def expect(self, doc, fragment):
        with pytest.raises(PlanDocumentError) as err:
            doc_to_plan(doc)
        assert fragment in str(err.value)

    def test_bad_json_reports_position(self):
        with pytest.raises(PlanDocumentError) as err:
            parse_doc('{"schema": 1,\n  "kind": }')
        assert "line 2" in str(err.value)
        with pytest.raises(PlanDocumentError):
            parse_doc("[1, 2]")

    def test_field_context_in_messages(self):
        doc = self.good_doc()
        doc["schema"] = 99
        self.expect(doc, "schema")

        doc = self.good_doc()
        doc["kind"] = "triangular"
        self.expect(doc, "kind")

        doc = self.good_doc()
        del doc["zone_hi"]
        self.expect(doc, "zone_hi")

        doc = self.good_doc()
        doc["zeta"] = True
        self.expect(doc, "zeta")

        doc = self.good_doc()
        doc["stages"] = []
        self.expect(doc, "stages")

        doc = self.good_doc()
        doc["stages"][0]["n"] = 0
        self.expect(doc, "stages[0].n")

        doc = self.good_doc()
        doc["stages"][0]["windows"][0] = [0]
        self.expect(doc, "stages[0].windows[0]")

        doc = self.good_doc()
        doc["stages"][1]["f"][0] = "wide"
        self.expect(doc, "stages[1].f")

        doc = self.good_doc()
        doc["model"] = "triangular"
        self.expect(doc, "model")

        doc = self.good_doc()
        doc["family"] = {"tag": "mystery"}
        self.expect(doc, "family")

        doc = self.good_doc()
        doc["sample_cap"] = "many"
        self.expect(doc, "sample_cap")

    def test_two_prop_grid_context(self):
        doc = self.good_doc("two-prop")
        doc["stages"][0]["decision"][0] = "..."
        self.expect(doc, "stages[0].decision")

        doc = self.good_doc("two-prop")
        rows = doc["stages"][0]["decision"]
        rows[1] = "7" + rows[1][1:]
        self.expect(doc, "decision")

        doc = self.good_doc("two-prop")
        doc["stages"][0]["midpoint"][2] = "x" * 5
        self.expect(doc, "midpoint")

    def test_unsupported_shapes_refuse_to_serialize(self):
        plan = plan_zoo()["two-prop"]
        odd = type(plan)(
            zone_lo=plan.zone_lo, zone_hi=plan.zone_hi,
            base_alphas=plan.base_alphas, base_betas=plan.base_betas,
            zeta=plan.zeta, stages=plan.stages, link_name="doubling")
        with pytest.raises(PlanDocumentError):
            plan_to_doc(odd)
