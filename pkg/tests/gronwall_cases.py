"""Random Gronwall instances shared by the unit and acceptance tests."""
import numpy as np

from godeconj.stieltjes import BvPath, PolynomialDensity, RegulatedSample


def sample(fn, times, atom_times=()):
    atom_times = np.array(sorted(atom_times), dtype=float)
    vals = fn(times, right=False)
    post = fn(atom_times, right=True) if atom_times.size else np.zeros(0)
    return RegulatedSample(times, vals, atom_times, post, {})


def random_gronwall_instance(rng):
    """Random nondecreasing h with atoms and a candidate u below the Gronwall bound."""
    a, b = 0.0, float(rng.uniform(0.5, 2.0))
    n_atoms = int(rng.integers(0, 4))
    atom_t = np.sort(rng.uniform(a + 0.05, b - 0.05, n_atoms))
    atoms = [(float(t), float(rng.uniform(0.05, 0.8))) for t in atom_t]
    h = BvPath((a, b), float(rng.normal()), PolynomialDensity(rng.uniform(0.0, 1.5, 2)), atoms)
    c1, c2 = float(rng.uniform(0.2, 3.0)), float(rng.uniform(0.1, 2.0))
    lam = float(rng.uniform(0.0, 1.3))
    wiggle = float(rng.uniform(0.0, 0.3))
    freq = float(rng.uniform(1.0, 8.0))
    h0 = float(h(a))

    def u(t, right):
        hv = h.right_value(t) if right else h(t)
        return c1 * np.exp(c2 * lam * (np.asarray(hv) - h0)) * (1 - wiggle * np.sin(freq * np.asarray(t)) ** 2)

    times = np.union1d(np.linspace(a, b, 41), atom_t)
    return sample(u, times, atom_t), h, c1, c2
