"""Shared builders and independent oracles for the test suite."""

from __future__ import annotations

import numpy as np

from martbench import (
    FunctionVector,
    StoppingTime,
    TreeSpace,
    make_exponent_sequence,
    make_tree_space,
    make_weight_system,
)


def random_space(rng: np.random.Generator, max_depth: int = 3, branchings=(2, 3)) -> TreeSpace:
    depth = int(rng.integers(1, max_depth + 1))
    branching = int(rng.choice(branchings))
    n = branching**depth
    probs = rng.uniform(0.2, 1.0, n)
    probs /= probs.sum()
    probs[-1] += 1.0 - probs.sum()
    return make_tree_space(depth, branching, probs)


def random_sequence(rng: np.random.Generator, max_head: int = 4, allow_finite: bool = True):
    m = int(rng.integers(1, max_head + 1))
    head = list(rng.uniform(1.2, 6.0, m))
    if allow_finite and rng.random() < 0.3:
        return make_exponent_sequence(head, 0.0)
    tail_mass = float(rng.uniform(0.02, 0.5))
    tail_ratio = float(rng.uniform(0.2, 0.8))
    if tail_mass * (1.0 - tail_ratio) >= 1.0:
        tail_mass = 0.5
    return make_exponent_sequence(head, tail_mass, tail_ratio)


def random_positive(rng: np.random.Generator, space: TreeSpace, spread: float = 4.0) -> np.ndarray:
    return np.exp(rng.uniform(-np.log(spread), np.log(spread), space.n_leaves))


def random_weight_system(rng: np.random.Generator, space: TreeSpace, seq, spread: float = 4.0):
    n_active = int(rng.integers(1, seq.head_len + 1))
    weights = [random_positive(rng, space, spread) for _ in range(n_active)]
    return make_weight_system(space, seq, weights, random_positive(rng, space, spread))


def random_fvec(rng: np.random.Generator, space: TreeSpace, seq, spread: float = 6.0) -> FunctionVector:
    n_active = int(rng.integers(1, seq.head_len + 1))
    comps = tuple(random_positive(rng, space, spread) for _ in range(n_active))
    return FunctionVector(comps, None)


def random_leaf_mask(rng: np.random.Generator, space: TreeSpace, allow_empty: bool = False) -> np.ndarray:
    mask = rng.random(space.n_leaves) < 0.5
    if not allow_empty and not mask.any():
        mask[int(rng.integers(space.n_leaves))] = True
    return mask


def stopped_average_oracle(space: TreeSpace, f: np.ndarray, tau: StoppingTime) -> np.ndarray:
    """Conditional expectation with respect to the stopped sigma-field by
    explicit partition averaging: atoms of the stopped field are the
    level-n atoms inside {tau = n} and the single leaves of {tau = inf}."""
    out = np.array(f, dtype=float, copy=True)
    w = space.leaf_probs
    for n in space.levels:
        for j in range(space.n_atoms(n)):
            sl = space.atom_slice(n, j)
            if np.all(tau.values[sl] == n):
                out[sl] = np.sum(w[sl] * f[sl]) / np.sum(w[sl])
    return out


def two_function_holder_oracle(space: TreeSpace, f1, f2, p1: float, p2: float):
    """Direct two-factor bound: both sides of
    ||f1 f2||_{L^p} <= ||f1||_{L^{p1}} ||f2||_{L^{p2}}, 1/p = 1/p1 + 1/p2."""
    w = space.leaf_probs
    p = 1.0 / (1.0 / p1 + 1.0 / p2)
    lhs = np.sum(w * np.abs(f1 * f2) ** p) ** (1.0 / p)
    rhs = np.sum(w * np.abs(f1) ** p1) ** (1.0 / p1) * np.sum(w * np.abs(f2) ** p2) ** (
        1.0 / p2
    )
    return float(lhs), float(rhs)


def assert_close(a: float, b: float, rel: float = 1e-12) -> None:
    assert abs(a - b) <= rel * max(abs(a), abs(b), 1.0), f"{a} != {b}"
