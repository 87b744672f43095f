"""Smoke test for the `hemon` extension module.

Build the module first, e.g. `maturin develop -m crates/py/Cargo.toml
--features extension-module`, or build the cdylib with cargo and put it on
PYTHONPATH as `hemon.so`.
"""

import math

import hemon


def main():
    # 3-cycle plus a pendant: the lightest cycle edge is dropped
    edges = [(0, 1, 0.9), (1, 2, 0.8), (0, 2, 0.1), (2, 3, -0.4)]
    assert hemon.max_spanning_tree(4, edges) == [(0, 1), (1, 2), (2, 3)]

    tree = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (3, 7), (7, 8)]
    assert hemon.diameter_path(9, tree) == [0, 1, 2, 3, 4, 5, 6]
    levels = hemon.decompose(9, tree)
    assert levels[0] == [[0, 1, 2, 3, 4, 5, 6]]
    assert levels[1] == [[3, 7, 8]]

    assert hemon.node_influence(9, tree, 0, 3) == 1 / (1 * 2 * 2)
    assert math.isclose(hemon.node_influence_oracle(9, tree, 0, 3, 3), 0.25, abs_tol=1e-12)
    assert hemon.path_information(2) == 4.0
    assert hemon.path_information_closed_form(2) == 5.0

    c = hemon.pearson([[1.0, 2.0], [2.0, 4.1], [3.0, 6.0]])
    assert c[0][0] == 1.0 and c[0][1] > 0.99
    assert hemon.mae([[0.0, 10.0], [1.0, 1.0]], [[5.0, 5.0], [1.0, 1.0]]) == 5.0

    data = hemon.synthesize(nodes=8, time_points=120, noise=0.2, categories=1, seed=2)
    x, y = data["time_series"], data["ratings"]
    model = hemon.Model("hemon", 8, data["tree"], 1, embed_dim=4, hidden_dim=4, lstm_layers=1, max_epochs=5, seed=1)
    report = model.train(x[:80], y[:80], x[80:100], y[80:100])
    assert len(report["val_mae"]) == 5
    preds = model.predict(x[100:])
    assert len(preds) == 20 and all(0.0 <= p[0] <= 100.0 for p in preds)
    restored = hemon.Model.from_json(model.to_json())
    assert restored.predict(x[100:]) == preds
    print(f"{model.label}: {model.parameter_count} parameters, test MAE {model.evaluate(x[100:], y[100:]):.3f}")
    print("smoke test passed")


if __name__ == "__main__":
    main()
