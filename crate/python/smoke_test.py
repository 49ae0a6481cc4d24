"""Quick end-to-end check of the compiled extension.

Build and install first, for example with
``maturin develop --release -m crates/python/Cargo.toml``.
"""

import npgm

sim = npgm.simulate("ar2", p=6, n=200, seed=1)
assert len(sim.data) == 200 and len(sim.data[0]) == 6
assert len(sim.edges) == 2 * 6 - 3

res = npgm.fit(sim.data, method="vb", seed=3, transform=False, rescale=False)
print(res)
assert len(res.omega) == 6
assert all(abs(res.omega[i][j] - res.omega[j][i]) < 1e-12 for i in range(6) for j in range(6))
assert res.converged

adjacency = [[1.0 if (min(i, j), max(i, j)) in res.edges else 0.0 for j in range(6)] for i in range(6)]
metrics = npgm.score(adjacency, sim.omega, omega_hat=res.omega, omega_true=sim.omega)
print(metrics)
assert metrics["tp"] + metrics["fn"] == len(sim.edges)
assert 0.0 <= metrics["scaled_l1"] < 0.5

hs = npgm.fit(sim.data, method="horseshoe", burnin=50, samples=100, seed=3)
assert hs.selected_c in (0.1, 1.0, 10.0)
assert len(hs.bic_table) == 3

rho = npgm.partial_correlation([[2.0, -1.0], [-1.0, 2.0]])
assert abs(rho[0][1] - 0.5) < 1e-15

try:
    npgm.fit([[1.0, 2.0], [3.0]])
except ValueError:
    pass
else:
    raise AssertionError("ragged input accepted")

print("ok")
