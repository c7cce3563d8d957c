import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from msfseg import lwa
from msfseg.grid import (ContractError, GridGraph, Image, SeedSet, Segmentation, boundary_mask,
                         cut_set, edge_endpoints, incident_edges)


def brute_edges(h, w):
    """Edge list written out straight from the indexing rule."""
    out = []
    for r in range(h):
        for c in range(w - 1):
            out.append((r * w + c, r * w + c + 1))
    for r in range(h - 1):
        for c in range(w):
            out.append((r * w + c, (r + 1) * w + c))
    return out


def test_edge_endpoints_examples():
    g = GridGraph(3, 3)
    assert edge_endpoints(g, 0) == (0, 1)
    assert edge_endpoints(g, 6) == (0, 3)
    g2 = GridGraph(2, 2)
    assert {edge_endpoints(g2, e) for e in range(4)} == {(0, 1), (2, 3), (0, 2), (1, 3)}


def test_edge_endpoints_out_of_range():
    with pytest.raises(IndexError):
        edge_endpoints(GridGraph(3, 3), 12)
    with pytest.raises(IndexError):
        edge_endpoints(GridGraph(3, 3), -1)


@pytest.mark.parametrize("h,w", [(1, 2), (2, 2), (3, 3), (4, 7), (5, 1)])
def test_counts_and_indexing_match_brute_force(h, w):
    g = GridGraph(h, w)
    assert g.num_nodes == h * w
    assert g.num_edges == h * (w - 1) + (h - 1) * w
    assert [edge_endpoints(g, e) for e in range(g.num_edges)] == brute_edges(h, w)
    for e in range(g.num_edges):
        assert g.edge_id(*edge_endpoints(g, e)) == e
        u, v = edge_endpoints(g, e)
        assert g.edge_id(v, u) == e


def test_incident_edges():
    g = GridGraph(3, 3)
    assert len(incident_edges(g, 4)) == 4
    assert len(incident_edges(g, 0)) == 2
    assert len(incident_edges(g, 1)) == 3
    assert incident_edges(GridGraph(1, 2), 0) == [(0, 1)]
    # left, right, up, down
    assert [n for _, n in incident_edges(g, 4)] == [3, 5, 1, 7]
    for node in range(g.num_nodes):
        for e, n in incident_edges(g, node):
            assert set(edge_endpoints(g, e)) == {node, n}
    with pytest.raises(IndexError):
        incident_edges(g, 9)


def test_cut_set_examples():
    assert cut_set(Segmentation.from_array(np.ones((3, 3), int))) == set()
    assert cut_set(Segmentation.from_array([[1, 2]])) == {0}
    seg = Segmentation.from_array([[1, 1], [2, 2]])
    assert cut_set(seg) == {2, 3}  # both vertical edges


def test_cut_set_rejects_incomplete():
    with pytest.raises(ContractError):
        cut_set(Segmentation.from_array([[1, 0]]))


def test_boundary_mask_examples():
    assert not boundary_mask(Segmentation.from_array(np.ones((3, 3), int))).any()
    assert boundary_mask(Segmentation.from_array([[1, 2]])).tolist() == [True, True]
    seg = Segmentation.from_array([[1, 2, 2]] * 3)
    mask = boundary_mask(seg).reshape(3, 3)
    assert mask[:, 0].all() and mask[:, 1].all() and not mask[:, 2].any()


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.data())
def test_cut_set_label_permutation_invariant(h, w, data):
    labels = np.array(data.draw(st.lists(st.integers(1, 4), min_size=h * w, max_size=h * w)))
    perm = np.array([0] + data.draw(st.permutations([1, 2, 3, 4])))
    a = Segmentation(GridGraph(h, w), labels)
    b = Segmentation(GridGraph(h, w), perm[labels])
    assert cut_set(a) == cut_set(b)
    assert len(cut_set(a)) <= a.graph.num_edges


def test_seedset_validation():
    SeedSet(((0, 1), (5, 2)))
    with pytest.raises(ValueError):
        SeedSet(((0, 1), (5, 1)))
    with pytest.raises(ValueError):
        SeedSet(((0, 1), (0, 2)))
    with pytest.raises(ValueError):
        SeedSet(((0, 1), (3, 3)))


def test_image_validation():
    with pytest.raises(ValueError):
        Image(GridGraph(2, 2), np.zeros(3))
    with pytest.raises(ValueError):
        Image(GridGraph(1, 2), np.array([0.0, np.nan]))
    im = Image.from_array(np.arange(12.0).reshape(2, 3, 2))
    assert im.channels == 2 and im.data.shape == (6, 2)
    assert np.array_equal(im.to_array(), np.arange(12.0).reshape(2, 3, 2))


def test_lwa_roundtrip(tmp_path):
    arr = np.random.default_rng(0).random((4, 5, 3)).astype(np.float32)
    path = tmp_path / "a.lwa1"
    lwa.save(path, arr)
    raw = path.read_bytes()
    assert raw[:4] == b"LWA1"
    assert np.frombuffer(raw[4:24], "<u4").tolist() == [1, 0, 4, 5, 3]
    assert np.array_equal(lwa.load(path), arr)
    labels = np.arange(6).reshape(2, 3)
    lwa.save(path, labels, lwa.UINT32)
    assert np.array_equal(lwa.load(path)[:, :, 0], labels)
    assert lwa.validate(path)


def test_lwa_rejects_garbage(tmp_path):
    path = tmp_path / "bad.lwa1"
    path.write_bytes(b"LWA2" + bytes(20))
    assert not lwa.validate(path)
    good = lwa.encode(np.zeros((2, 2)))
    with pytest.raises(lwa.FormatError):
        lwa.decode(good[:-1])
    with pytest.raises(ValueError):
        lwa.encode(np.array([-1]), lwa.UINT32)
