"""Smoke test for the privleak Python extension.

Build and install first, e.g. `pip install ./crates/py` or
`maturin develop -m crates/py/Cargo.toml`, then run `python python/smoke_test.py`.
"""

import math
import os
import tempfile

import privleak


def main():
    assert set(privleak.MODELS) == {"baseline", "gr", "cgt", "ldp", "mdp", "cape"}

    assert abs(privleak.f_quantile(2, 14) - 3.739) < 2e-3
    assert abs(privleak.f_survival(2, 14, 9.318) - 0.003) < 1e-3
    summary = privleak.anova_two_way([[0.9, 0.5, 0.4], [0.6, 0.4, 0.3], [0.5, 0.3, 0.35]])
    assert (summary["df_row"], summary["df_col"], summary["df_error"]) == (2, 2, 4)

    noisy = privleak.ldp_perturb([0.0, 2.0, 4.0], epsilon=0.5, seed=3)
    assert noisy == privleak.ldp_perturb([0.0, 2.0, 4.0], epsilon=0.5, seed=3)
    assert len(noisy) == 3 and all(math.isfinite(x) for x in noisy)
    assert privleak.distance([1.0, 0.0], [0.0, 1.0], "cosine") == 1.0

    data, vocab = privleak.generate_synthetic(n=300, dim=12, seed=5)
    assert len(data) == 300 and data.dim == 12 and vocab.dim == 12
    tokens = data.tokens()[0]
    swapped = privleak.mdp_privatize(tokens, vocab, epsilon=1000.0, seed=1)
    assert swapped == tokens

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "d.jsonl")
        data.save(path)
        again = privleak.Dataset.load(path)
        assert again.embeddings() == data.embeddings()

    rows = privleak.run_experiment(data, "cape", epsilon=0.1, lambda_=1.0, epochs=3, attacker_width=16)
    assert [r["role"] for r in rows] == ["base", "attacker", "attacker", "attacker"]
    assert rows == privleak.run_experiment(data, "cape", epsilon=0.1, lambda_=1.0, epochs=3, attacker_width=16)

    deviation = privleak.embedding_deviation(data, vocab)
    assert [r["mechanism"] for r in deviation] == ["ldp", "mdp"]
    assert deviation[1]["mean_euclidean"] < deviation[0]["mean_euclidean"]

    try:
        privleak.run_experiment(data, "nonsense")
    except ValueError as e:
        assert "valid models" in str(e)
    else:
        raise AssertionError("unknown model accepted")

    print("privleak smoke test passed")


if __name__ == "__main__":
    main()
