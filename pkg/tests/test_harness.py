import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import metrics
from corpus import ManifestRow, get_program
from harness import (
    CapExceeded,
    HarnessError,
    MismatchObserver,
    MismatchSubject,
    PositiveSampler,
    SamplerFactory,
    UniformSampler,
    audit_expressiveness,
    bin_report,
    check_equivalence,
    corrupt_heaviside,
    default_exhaustive_len,
    format_audit,
    word_text,
)
from interp import accepts
from oracles import UnknownLanguage
from runtime import accepts_net, zero_transformer


class CollectingObserver(MismatchObserver):
    def __init__(self):
        self.seen = []

    def update(self, program, witness):
        self.seen.append((program, witness))


@pytest.mark.parametrize("name", ["MAJORITY", "SUBSTRING_AB"])
def test_equivalence_has_no_mismatches(name, compiled):
    net, plan, _ = compiled(name)
    report = check_equivalence(
        get_program(name),
        exhaustive_len=8,
        lengths=(25, 50),
        count=20,
        seed=7,
        channel_samples=10,
        net=net,
        plan=plan,
    )
    assert report.ok
    assert report.mismatches == 0 and report.witnesses == []
    assert report.exhaustive_count == 2**9 - 1
    assert report.sampled == {25: 24, 50: 24}
    assert report.max_bool_error == 0.0
    assert report.max_count_error <= 2.0 ** (2 - net.precision.p)
    assert report.bins == {"1-50": 1.0, "51-100": None, "101-150": None}


def test_report_dict_omits_runtime(compiled):
    net, plan, _ = compiled("MAJORITY")
    report = check_equivalence(get_program("MAJORITY"), exhaustive_len=3, net=net, plan=plan)
    assert "runtime_s" not in report.as_dict()
    assert "runtime_s" in report.as_dict(include_runtime=True)


def test_predict_programs_compare_sets(compiled):
    net, plan, _ = compiled("INDUCTION_ALL")
    report = check_equivalence(
        get_program("INDUCTION_ALL"),
        exhaustive_len=3,
        lengths=(20,),
        count=10,
        channel_samples=3,
        net=net,
        plan=plan,
    )
    assert report.predict_mismatches == 0
    assert report.sampled == {20: 10}


def test_cap_exceeded():
    with pytest.raises(CapExceeded) as exc:
        check_equivalence(get_program("MAJORITY"), exhaustive_len=20)
    assert exc.value.cap == 200000


def test_default_exhaustive_len():
    assert default_exhaustive_len(get_program("MAJORITY")) == 12
    assert default_exhaustive_len(get_program("ABCDE")) == 7
    assert default_exhaustive_len(get_program("MAJORITY"), cap=100) == 5


def test_corrupted_net_is_caught(compiled):
    net, plan, _ = compiled("MAJORITY")
    bad = corrupt_heaviside(net)
    assert bad != net
    assert accepts_net(net, "11") and not accepts_net(bad, "11")

    alerts = MismatchSubject()
    observer = CollectingObserver()
    alerts.attach(observer)
    report = check_equivalence(
        get_program("MAJORITY"),
        exhaustive_len=6,
        channel_samples=0,
        net=bad,
        plan=plan,
        alerts=alerts,
    )
    assert report.mismatches > 0
    assert not report.ok
    assert 0 < len(report.witnesses) <= 10
    assert len(observer.seen) == report.mismatches
    witness = report.witnesses[0]
    assert witness["interp"] is True and witness["net"] is False


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from(["0", "1"]), min_size=1, max_size=40))
def test_corrupted_net_rejects_every_member(compiled, word):
    bad = corrupt_heaviside(compiled("MAJORITY")[0])
    if accepts(get_program("MAJORITY"), word):
        assert not accepts_net(bad, word)


def test_corrupt_needs_a_constant_unit():
    with pytest.raises(HarnessError):
        corrupt_heaviside(zero_transformer(("a",), width=2))


def test_reports_do_not_depend_on_worker_count(compiled):
    net, plan, _ = compiled("DYCK1")
    program = get_program("DYCK1")
    kwargs = dict(exhaustive_len=7, lengths=(30,), count=40, seed=3, net=net, plan=plan)
    one = check_equivalence(program, workers=1, **kwargs)
    two = check_equivalence(program, workers=2, **kwargs)
    assert one.as_dict() == two.as_dict()


def test_samplers():
    program = get_program("AAAA_STAR")
    uniform = SamplerFactory.get_sampler("uniform")
    positive = SamplerFactory.get_sampler("positive")
    assert isinstance(uniform, UniformSampler)
    assert isinstance(positive, PositiveSampler)
    assert uniform.draw(program, 5, 3, seed=1) == uniform.draw(program, 5, 3, seed=1)
    assert positive.draw(program, 8, 2, seed=1) == [("a",) * 8] * 2
    assert positive.draw(program, 7, 2, seed=1) == []
    with pytest.raises(HarnessError):
        SamplerFactory.get_sampler("adversarial")


def test_bin_report_language(compiled):
    net, _, _ = compiled("DYCK1")
    report = bin_report(get_program("DYCK1"), "dyck1", count=8, seed=2, net=net)
    assert report.per_step is False
    assert [s.accuracy for s in report.scores] == [1.0, 1.0, 1.0]


def test_bin_report_next_symbol_oracle(compiled):
    net, _, _ = compiled("INDUCTION_ALL")
    report = bin_report(
        get_program("INDUCTION_ALL"),
        "bigram_support",
        count=10,
        net=net,
        bins=((1, 20), (21, 40)),
    )
    assert report.per_step is True
    assert report.as_dict()["bins"] == {"1-20": 1.0, "21-40": 1.0}


def test_empty_bin_is_absent(compiled):
    net, _, _ = compiled("MAJORITY")
    report = bin_report(get_program("MAJORITY"), "majority", count=4, lmin=60, net=net)
    first = report.scores[0]
    assert first.samples == 0 and first.accuracy is None
    assert report.scores[1].accuracy == 1.0


def test_bin_report_unknown_oracle(compiled):
    with pytest.raises(UnknownLanguage):
        bin_report(get_program("MAJORITY"), "tomita9", net=compiled("MAJORITY")[0])


def test_audit_passes_on_corpus():
    rows = audit_expressiveness()
    assert rows and all(r.passed for r in rows), format_audit([r for r in rows if not r.passed])


def test_audit_flags_bad_rows():
    rows = [
        ManifestRow("language", "x", "x", None, True, True),
        ManifestRow("language", "y", "y", "MAJORITY", False, True),
        ManifestRow("language", "z", "z", "AA_STAR", True, True),
        ManifestRow("language", "w", "w", "MAJORITY", False, False),
    ]
    assert [r.passed for r in audit_expressiveness(rows)] == [False, False, False, False]


def test_metrics_are_recorded(compiled):
    net, plan, _ = compiled("EXISTS_B")
    before = metrics.registry.get_sample_value(
        "crasp_strings_checked_total", {"program": "EXISTS_B"}
    ) or 0.0
    check_equivalence(get_program("EXISTS_B"), exhaustive_len=4, net=net, plan=plan)
    after = metrics.registry.get_sample_value(
        "crasp_strings_checked_total", {"program": "EXISTS_B"}
    )
    assert after - before == 31


def test_export_metrics(tmp_path):
    path = tmp_path / "crasp.prom"
    assert metrics.export_metrics(path) is True
    assert "crasp_verify_seconds" in path.read_text()


def test_word_text():
    assert word_text(("a", "b")) == "ab"
    assert word_text(("12", "3")) == "12 3"
