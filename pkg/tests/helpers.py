"""Shared builders for the test suite."""

import numpy as np

from hybridswap.fock import ModeSpec, MultiModeState


def random_density(dims, seed, rank=None, labels="ABCDEFGH"):
    rng = np.random.default_rng(seed)
    n = int(np.prod(dims))
    rank = rank or n
    g = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    return MultiModeState(tuple(ModeSpec(labels[i], d) for i, d in enumerate(dims)), rho)


def random_unitary(n, seed):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))
