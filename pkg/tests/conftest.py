import sys

import numpy as np
import pytest

from covernet.graph import DissimilarityMatrix, Network


def random_matrix(n, rng, symmetric=False, low=0.05, high=1.0):
    w = rng.uniform(low, high, size=(n, n))
    if symmetric:
        w = (w + w.T) / 2
    np.fill_diagonal(w, 0.0)
    return DissimilarityMatrix(w)


def random_digraph(n, p, rng):
    mask = rng.random((n, n)) < p
    np.fill_diagonal(mask, False)
    s, t = np.nonzero(mask)
    return Network(n, s, t, rng.uniform(0.1, 1.0, s.size))


def random_ugraph(n, p, rng):
    mask = np.triu(rng.random((n, n)) < p, k=1)
    s, t = np.nonzero(mask)
    return Network(n, s, t, rng.uniform(0.1, 1.0, s.size), directed=False)


def block_matrix(sizes, intra=0.2, inter=0.8):
    labels = np.repeat(np.arange(len(sizes)), sizes)
    w = np.where(labels[:, None] == labels[None, :], intra, inter).astype(float)
    np.fill_diagonal(w, 0.0)
    return DissimilarityMatrix(w), labels


def planted_matrix(sizes, rng, intra=0.2, inter=0.8, sd=0.05):
    labels = np.repeat(np.arange(len(sizes)), sizes)
    base = np.where(labels[:, None] == labels[None, :], intra, inter)
    w = np.clip(base + rng.normal(0, sd, base.shape), 0.01, None)
    w = (w + w.T) / 2
    np.fill_diagonal(w, 0.0)
    return DissimilarityMatrix(w), labels


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
