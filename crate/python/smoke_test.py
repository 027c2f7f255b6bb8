"""Smoke test for the idsup extension module.

Build and install first:
    pip install maturin
    maturin develop -m crates/python/Cargo.toml --release
"""

import json

import idsup


def main() -> None:
    sc = idsup.Scenario.random(7, atoms=6, points=4).with_replications(2000)
    assert sc.n_points == 4 and sc.n_atoms == 6
    assert idsup.Scenario.from_json(sc.to_json()).to_json() == sc.to_json()
    json.loads(sc.to_json())

    d2 = sc.d2()
    assert all(d2[i][i] == 0.0 for i in range(4))

    mean, se = idsup.expected_sup(sc)
    assert mean >= 0.0 and se >= 0.0
    again = idsup.expected_sup(sc)
    assert again == (mean, se), "same seed must reproduce"

    text, beta, constant = idsup.partition_tree(sc)
    assert text.startswith("level 0") and beta > 0.0 and constant <= 16.0

    names = idsup.check_names()
    assert "campbell" in names
    for name in ("campbell", "partition", "id2"):
        for record in idsup.run_check(name, sc):
            assert record["passed"], record

    try:
        idsup.run_check("no_such_check", sc)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown check accepted")

    print(f"ok: E sup = {mean:.4f} +/- {se:.4f}, beta = {beta:.4f}, {len(names)} checks")


if __name__ == "__main__":
    main()
