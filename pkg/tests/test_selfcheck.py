import re
from pathlib import Path

from cassikit.selfcheck import CRITERIA, INVARIANTS, REGISTRY, covered_criteria, format_table, run_all

DOC = Path(__file__).resolve().parents[1] / "docs" / "traceability.md"


def test_every_registered_check_passes():
    results = run_all(seed=0)
    failed = [f"{r.check.name}: {r.detail}" for r in results if not r.passed]
    assert not failed, "\n".join(failed)
    assert format_table(results).endswith(f"{len(results)}/{len(results)} checks passed")


def test_criteria_and_invariants_covered():
    assert set(CRITERIA) <= set(covered_criteria())
    claimed = {c for ch in REGISTRY for c in ch.covers}
    assert set(INVARIANTS) <= claimed
    assert len({ch.name for ch in REGISTRY}) == len(REGISTRY)


def test_traceability_doc_matches_registry():
    text = DOC.read_text()
    rows = dict(re.findall(r"^\| ([A-Z]\d) \|.*?\| `(\w+)` \|", text, flags=re.M))
    assert set(rows) == set(INVARIANTS)
    names = {ch.name: ch for ch in REGISTRY}
    for inv, name in rows.items():
        assert inv in names[name].covers


def test_suite_filter():
    results = run_all(seed=1, suites={"priors"})
    assert {r.check.suite for r in results} == {"priors"} and all(r.passed for r in results)
