import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import geo_subarray_codeword, nesting_violations, polar_grid
from xlbeam.array_model import REFERENCE_ARRAY, ArrayConfig, beam_gain, far_steering, near_steering
from xlbeam.codebook import (
    DistanceIndexSet,
    angular_codebook,
    default_s_delta,
    distance_index,
    export_codebook,
    hierarchical_codebook,
    last_layer_candidates,
    last_layer_positions,
    lower_codeword,
    polar_codebook,
    read_codebook_bin,
    upper_codeword,
)

CFG = REFERENCE_ARRAY
SD = 68.27


def test_default_s_delta_reference():
    assert default_s_delta(CFG) == SD


def test_distance_index_set_is_one_based():
    ring = DistanceIndexSet(6)
    assert [ring[k] for k in range(1, 7)] == [0, 1, 2, 3, 4, 5]
    with pytest.raises(IndexError):
        ring[0]


def test_polar_rings_at_broadside():
    pcb = polar_codebook(CFG, 6, SD)
    n0 = 257  # theta = +1/512, the column nearest broadside
    rings = [pcb.distance(n0, s) for s in range(6)]
    t = pcb.thetas[n0 - 1]
    assert rings[0] == math.inf
    assert np.allclose(np.array(rings[1:]) / (1 - t * t), [68.27, 34.135, 22.7567, 17.0675, 13.654], rtol=1e-4)
    gaps = -np.diff(rings[1:])
    assert np.all(np.diff(gaps) < 0)


def test_polar_codebook_matches_geometry():
    pcb = polar_codebook(ArrayConfig(16, 0.003), 3, SD)
    assert len(pcb) == 48
    for n, s, t, r in polar_grid(16, 3, SD):
        w = pcb.codeword(n, s)
        assert w.theta == t
        assert np.allclose(w.weights, geo_subarray_codeword(t, r, 16, 16, 0.003), atol=1e-12)
    assert len(polar_codebook(CFG, 6, SD)) == 3072


def test_angular_codebook():
    cb = angular_codebook(ArrayConfig(4, 0.003))
    assert [c.theta for c in cb] == [-0.75, -0.25, 0.25, 0.75]
    ref = angular_codebook(CFG)
    assert len(ref) == 512
    for a, b in zip(ref[:-1:37], ref[1::37]):
        assert beam_gain(a, b) < 1e-12


def test_upper_codeword_layer_one():
    cws = [upper_codeword(1, i, CFG) for i in (1, 2)]
    assert [c.theta for c in cws] == [-0.5, 0.5]
    for c in cws:
        assert (c.first_active, c.last_active) == (256, 257)
        assert np.count_nonzero(c.weights) == 2


def test_upper_codeword_example_layer_seven():
    assert upper_codeword(7, 64, CFG).theta == pytest.approx(-0.0078125)


def test_upper_coverage_criterion():
    rng = np.random.default_rng(3)
    layers = {l: np.array([upper_codeword(l, i, CFG).weights for i in range(1, 2**l + 1)]) for l in range(1, 10)}
    for theta in rng.uniform(-1, 1, 1000):
        a = far_steering(theta, CFG.N)
        parent = None
        for l in range(1, 10):
            best = int(np.argmax(np.abs(layers[l].conj() @ a))) + 1
            if parent is not None:
                assert best in (2 * parent - 1, 2 * parent)
            parent = best


def test_codewords_are_centered():
    for cw in hierarchical_codebook(ArrayConfig(64, 0.003), 4, SD, 4):
        assert cw.first_active == (64 - cw.n_active) // 2 + 1
        assert np.count_nonzero(cw.weights[: cw.first_active - 1]) == 0
        assert np.count_nonzero(cw.weights[cw.last_active:]) == 0


@pytest.mark.parametrize("j, pos, dist", [(1, 2, 68.27), (2, 5, 68.27 / 4)])
def test_distance_index_first_lower_layer(j, pos, dist):
    assert distance_index(8, j, 6, 7) == pos
    cw = lower_codeword(8, 100, j, CFG, 6, SD, 7)
    assert cw.distance == pytest.approx(dist * (1 - cw.theta**2))


def test_distance_index_second_lower_layer():
    assert [distance_index(9, j, 6, 7) for j in range(1, 5)] == [1, 3, 4, 6]


@given(st.integers(1, 4), st.integers(1, 8), st.integers(1, 10), st.data())
def test_distance_index_in_range(L, du, S, data):
    u = L + du
    j = data.draw(st.integers(1, 2 ** (u - L)))
    k = distance_index(u, j, S, L)
    assert 1 <= k <= S
    assert k == math.ceil((2 * j - 1) * S / (2 * 2 ** (u - L)))


def test_lower_codeword_example():
    cw = lower_codeword(8, 128, 1, CFG, 6, SD, 7)
    assert cw.theta == pytest.approx(-0.00390625)
    assert cw.distance == pytest.approx(68.27, rel=1e-4)
    assert cw.n_active == 256
    ref = geo_subarray_codeword(cw.theta, cw.distance, 256, 512, 0.003)
    assert np.allclose(cw.weights, ref, atol=1e-12)


def test_lower_codeword_last_layer_matches_polar_angles():
    pcb = polar_codebook(CFG, 6, SD)
    for n in range(1, 513, 17):
        assert lower_codeword(9, n, 1, CFG, 6, SD, 7).theta == pcb.thetas[n - 1]


def test_lower_codeword_range_errors():
    with pytest.raises(IndexError):
        lower_codeword(8, 257, 1, CFG, 6, SD, 7)
    with pytest.raises(IndexError):
        lower_codeword(8, 1, 3, CFG, 6, SD, 7)
    with pytest.raises(IndexError):
        lower_codeword(7, 1, 1, CFG, 6, SD, 7)


def test_last_layer_example_window():
    cands = last_layer_candidates(128, 1, "example1-window", CFG, 6, SD, 7)
    assert len(cands) == 6
    assert sorted({c.theta for c in cands}) == [-1 + 509 / 512, -1 + 511 / 512]
    t = cands[0].theta
    assert [c.distance for c in cands[:3]] == [math.inf, pytest.approx(SD * (1 - t * t)), pytest.approx(SD * (1 - t * t) / 2)]


def test_last_layer_strict_rule():
    assert last_layer_positions(1, 6, 7, 9, "eq15-strict") == [1, 2, 3, 4]
    assert len(last_layer_candidates(128, 1, "eq15-strict", CFG, 6, SD, 7)) == 8


@pytest.mark.parametrize("rule", ["example1-window", "eq15-strict"])
def test_last_layer_right_edge_clamped(rule):
    assert max(last_layer_positions(2, 6, 7, 9, rule)) <= 6
    assert min(last_layer_positions(1, 6, 7, 9, rule)) >= 1


def test_last_layer_unknown_rule():
    with pytest.raises(ValueError):
        last_layer_positions(1, 6, 7, 9, "nearest")


def _nesting_children(u, i, j, L):
    angles = (2 * i - 1, 2 * i)
    dists = (2 * j - 1, 2 * j)
    return {(a, b) for a in angles for b in dists}


def test_hierarchical_nesting_index_space():
    assert nesting_violations(ArrayConfig(64, 0.003), 4, SD, 4) == []
    assert nesting_violations(CFG, 6, SD, 7) == []


def test_hierarchical_nesting_gain_argmax():
    # every polar codeword's best layer-(u+1) codeword is a child of its best layer-u codeword
    cfg, S, L = ArrayConfig(64, 0.003), 4, 4
    pcb = polar_codebook(cfg, S, SD)
    books = {u: [lower_codeword(u, i, j, cfg, S, SD, L) for i in range(1, 2**u + 1) for j in range(1, 2 ** (u - L) + 1)]
             for u in range(L + 1, 7)}
    mats = {u: np.array([c.weights for c in cws]) for u, cws in books.items()}
    violations = []
    for n, s in pcb.indices():
        b = near_steering(float(pcb.thetas[n - 1]), pcb.distance(n, s), cfg)
        for u in range(L + 1, 6):
            p = books[u][int(np.argmax(np.abs(mats[u].conj() @ b)))]
            c = books[u + 1][int(np.argmax(np.abs(mats[u + 1].conj() @ b)))]
            if (c.angle_index, c.distance_index) not in _nesting_children(u, p.angle_index, p.distance_index, L):
                violations.append(((n, s), u))
    assert violations == []


def test_hierarchical_codebook_count_and_purity():
    cfg = ArrayConfig(64, 0.003)
    a = hierarchical_codebook(cfg, 4, SD, 4)
    assert len(a) == sum(2**l for l in range(1, 5)) + 32 * 2 + 64 * 4
    b = hierarchical_codebook(cfg, 4, SD, 4)
    assert all(np.array_equal(x.weights, y.weights) for x, y in zip(a, b))


def test_export_roundtrip(tmp_path):
    cfg = ArrayConfig(16, 0.003)
    pcb = polar_codebook(cfg, 3, SD)
    assert export_codebook(pcb, tmp_path / "a.csv", tmp_path / "a.bin") == 48
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == "layer,angle_index,distance_index,theta,distance_m_or_inf,first_active,last_active"
    assert len(lines) == 49 and lines[1].split(",")[4] == "inf"
    back = read_codebook_bin(tmp_path / "a.bin", 16)
    assert np.array_equal(back, pcb.matrix.T)
    export_codebook(pcb, tmp_path / "b.csv", tmp_path / "b.bin")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
