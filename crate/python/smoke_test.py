"""Smoke test for the Python bindings.

Build and install first:
    pip install --no-build-isolation ./crates/python
"""

from fractions import Fraction

import vertiport_auction as va


def main():
    doc = va.Document.generate(seed=3)
    assert doc.validate() == [], doc.validate()
    assert va.Document.parse(doc.render()).render() == doc.render()

    bnb = doc.solve()
    enum = doc.solve(strategy="enumerate")
    assert bnb["objective"] == enum["objective"]
    assert bnb["allocation"] == enum["allocation"]

    outcome = doc.auction()
    oracle = doc.oracle()
    assert outcome["welfare"] == oracle["welfare"] == bnb["objective"]
    assert outcome["payments"] == oracle["payments"]
    assert all(isinstance(p, Fraction) for p in outcome["payments"].values())
    assert all(u >= 0 for u in outcome["utilities"].values())

    assert doc.check_properties(misreports=10) == []
    assert doc.check_properties(misreports=20, payment_rule="unzeroed") != []
    assert doc.graph_dot().startswith("digraph")

    try:
        va.Document.parse("{}")
    except ValueError:
        pass
    else:
        raise AssertionError("empty document accepted")

    print(doc)
    print("welfare", outcome["welfare"], "payments", dict(outcome["payments"]))
    print("smoke test ok")


if __name__ == "__main__":
    main()
