import numpy as np
import pytest

from msfseg.grid import GridGraph, SeedSet
from msfseg.msf import StaticAltitudes, grow, segmentation_of
from msfseg.synth import seed_oracle


def random_seeds(rng, graph, k):
    nodes = rng.choice(graph.num_nodes, size=k, replace=False)
    return SeedSet(tuple((int(n), i + 1) for i, n in enumerate(nodes)))


def random_instance(rng, max_h=8, max_w=8, max_seeds=3, min_side=1):
    h = int(rng.integers(min_side, max_h + 1))
    w = int(rng.integers(max(min_side, 1 if h > 1 else 2), max_w + 1))
    graph = GridGraph(h, w)
    k = int(rng.integers(1, min(max_seeds, graph.num_nodes) + 1))
    alt = rng.permutation(graph.num_edges) / graph.num_edges + rng.random() * 0.01
    return graph, alt, random_seeds(rng, graph, k)


def random_gt_instance(rng, h, w, regions):
    """Ground truth from a random forest, oracle seeds, and independent random altitudes."""
    graph = GridGraph(h, w)
    gt_alt = rng.random(graph.num_edges)
    gt = segmentation_of(grow(graph, None, random_seeds(rng, graph, regions), StaticAltitudes(gt_alt)))
    seeds = seed_oracle(gt)
    alt = rng.random(graph.num_edges)
    return graph, gt, seeds, alt


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# pass/fail lines from test_acceptance.py, echoed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
