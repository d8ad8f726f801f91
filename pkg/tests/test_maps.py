from __future__ import annotations

from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import blob_map, square_map
from semvc.maps import (
    InstanceContour,
    as_label_map,
    boundary_mask,
    extract_instances,
    fill_mask,
    label_components,
    rasterize,
)

# clockwise ring in image coordinates, starting at west
RING = [(0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1)]


def brute_boundary(m):
    h, w = m.shape
    out = set()
    for r in range(h):
        for c in range(w):
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    rr, cc = r + dr, c + dc
                    if (dr or dc) and (not (0 <= rr < h and 0 <= cc < w) or m[rr, cc] != m[r, c]):
                        out.add((r, c))
    return out


def brute_components(m):
    """4-connected equal-label components by BFS; each a set of pixels."""
    h, w = m.shape
    seen = np.zeros(m.shape, bool)
    comps = []
    for r in range(h):
        for c in range(w):
            if seen[r, c]:
                continue
            comp = set()
            queue = deque([(r, c)])
            seen[r, c] = True
            while queue:
                y, x = queue.popleft()
                comp.add((y, x))
                for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w and not seen[yy, xx] and m[yy, xx] == m[r, c]:
                        seen[yy, xx] = True
                        queue.append((yy, xx))
            comps.append(comp)
    return comps


def moore_oracle(pixels):
    """Textbook Moore-neighbour trace over a pixel set; stops when the first move repeats."""
    start = min(pixels)
    cur = start
    back = (start[0], start[1] - 1)
    out = [start]
    first = None
    while True:
        ring = [(cur[0] + dr, cur[1] + dc) for dr, dc in RING]
        i = ring.index(back)
        nxt = None
        for k in range(1, 9):
            cand = ring[(i + k) % 8]
            if cand in pixels:
                nxt = cand
                back = ring[(i + k - 1) % 8]
                break
        if nxt is None:
            return out
        if first is None:
            first = nxt
        elif cur == start and nxt == first:
            return out[:-1] if len(out) > 1 and out[-1] == start else out
        out.append(nxt)
        cur = nxt


def flood_fill_oracle(points, h, w):
    """Pixels inside or on an 8-connected closed outline: BFS the outside in a padded grid."""
    outline = {tuple(p) for p in points}
    H, W = h + 2, w + 2
    outside = set()
    queue = deque([(-1, -1)])
    outside.add((-1, -1))
    while queue:
        r, c = queue.popleft()
        for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            q = (r + dr, c + dc)
            if -1 <= q[0] < H - 1 and -1 <= q[1] < W - 1 and q not in outline and q not in outside:
                outside.add(q)
                queue.append(q)
    return {(r, c) for r in range(h) for c in range(w) if (r, c) not in outside}


def check_contour(c: InstanceContour, shape):
    pts = [tuple(p) for p in c.points.tolist()]
    assert pts
    h, w = shape
    assert all(0 <= r < h and 0 <= cc < w for r, cc in pts)
    for a, b in zip(pts, pts[1:] + pts[:1]):
        if len(pts) > 1:
            assert max(abs(a[0] - b[0]), abs(a[1] - b[1])) == 1


def signed_area(pts):
    p = np.asarray(pts, float)
    # rows point down, so a clockwise loop on screen has positive area in (col, row)
    x, y = p[:, 1], p[:, 0]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


class TestExtract:
    def test_uniform_map_is_one_instance_with_28_border_pixels(self):
        m = np.zeros((8, 8), np.uint16)
        inst = extract_instances(m)
        assert len(inst) == 1
        c = inst[0]
        assert (c.label, c.area) == (0, 64)
        expected = brute_boundary(m)
        assert len(expected) == 28
        assert {tuple(p) for p in c.points.tolist()} == expected
        assert len(c.points) == 28

    def test_two_separate_blocks_split(self):
        m = np.zeros((8, 8), np.uint16)
        m[1:3, 1:3] = 5
        m[5:7, 4:6] = 5
        inst = extract_instances(m)
        assert [(c.label, c.area) for c in inst] == [(0, 56), (5, 4), (5, 4)]
        assert inst[1].start == (1, 1) and inst[2].start == (5, 4)

    def test_square_trace_matches_oracle(self, square):
        inst = extract_instances(square)
        sq = [c for c in inst if c.label == 7][0]
        pixels = {(r, c) for r in range(2, 6) for c in range(2, 6)}
        expected = moore_oracle(pixels)
        # frozen from the oracle above
        assert expected == [
            (2, 2), (2, 3), (2, 4), (2, 5), (3, 5), (4, 5),
            (5, 5), (5, 4), (5, 3), (5, 2), (4, 2), (3, 2),
        ]
        assert [tuple(p) for p in sq.points.tolist()] == expected
        assert {tuple(p) for p in sq.points.tolist()} == brute_boundary(square) & pixels
        assert signed_area(sq.points) > 0

    def test_single_pixel_and_line(self):
        m = np.zeros((5, 7), np.uint16)
        m[2, 3] = 1
        m[4, 1:6] = 2
        inst = {c.label: c for c in extract_instances(m)}
        assert inst[1].points.tolist() == [[2, 3]]
        assert inst[2].points.tolist() == [[4, 1], [4, 2], [4, 3], [4, 4], [4, 5], [4, 4], [4, 3], [4, 2]]

    def test_ordering_descending_enclosed_area(self):
        m = np.zeros((20, 20), np.uint16)
        m[2:12, 2:12] = 3
        m[4:10, 4:10] = 4  # hole in 3 bigger than ring's pixel count? ring=64, hole=36
        m[14:18, 14:19] = 1
        inst = extract_instances(m)
        assert [c.label for c in inst] == [0, 3, 4, 1]
        assert [c.enclosed_area for c in inst] == [400, 100, 36, 20]

    def test_ring_smaller_than_its_hole_still_paints_correctly(self):
        m = np.zeros((16, 16), np.uint16)
        m[2:14, 2:14] = 1
        m[3:13, 3:13] = 2  # hole content (100 px) outweighs the ring (44 px)
        inst = extract_instances(m)
        ring = [c for c in inst if c.label == 1][0]
        assert ring.area == 44 and ring.enclosed_area == 144
        assert np.array_equal(rasterize(inst, 16, 16), m)

    def test_components_against_bfs(self, rng):
        for _ in range(20):
            m = blob_map(rng, 12, 15)
            comps = brute_components(m)
            inst = extract_instances(m)
            assert sorted(len(c) for c in comps) == sorted(c.area for c in inst)

    def test_traces_against_oracle(self, rng):
        for _ in range(30):
            m = blob_map(rng, 10, 13, n_labels=3)
            for comp in brute_components(m):
                exp = moore_oracle(comp)
                lab = m[next(iter(comp))]
                got = [c for c in extract_instances(m) if c.label == lab and c.start == min(comp)]
                assert len(got) == 1
                assert [tuple(p) for p in got[0].points.tolist()] == exp

    def test_eight_connectivity_merges_diagonals(self):
        m = np.zeros((4, 4), np.uint16)
        m[0, 0] = m[1, 1] = 1
        assert len([c for c in extract_instances(m, 4) if c.label == 1]) == 2
        assert len([c for c in extract_instances(m, 8) if c.label == 1]) == 1
        with pytest.raises(ValueError):
            extract_instances(m, 6)

    def test_boundary_mask_matches_brute_force(self, rng):
        for _ in range(10):
            m = blob_map(rng, 9, 11)
            bm = boundary_mask(m)
            assert {tuple(p) for p in np.argwhere(bm).tolist()} == brute_boundary(m)

    def test_rejects_bad_maps(self):
        with pytest.raises(ValueError):
            as_label_map(np.zeros((0, 3)))
        with pytest.raises(ValueError):
            as_label_map(np.zeros(5))
        with pytest.raises(ValueError):
            as_label_map(np.full((2, 2), 70000))
        with pytest.raises(TypeError):
            as_label_map(np.zeros((2, 2), float))

    def test_deterministic(self, rng):
        m = blob_map(rng, 30, 30)
        a = extract_instances(m)
        b = extract_instances(m.copy())
        assert len(a) == len(b)
        assert all(x.same_as(y) for x, y in zip(a, b))


class TestRasterize:
    def test_square_fill_matches_flood_fill(self, square):
        sq = [c for c in extract_instances(square) if c.label == 7][0]
        expected = flood_fill_oracle(sq.points.tolist(), 8, 8)
        assert expected == {(r, c) for r in range(2, 6) for c in range(2, 6)}
        out = rasterize([sq], 8, 8, 0)
        assert {tuple(p) for p in np.argwhere(out == 7).tolist()} == expected

    def test_empty_sequence_gives_background(self):
        assert np.array_equal(rasterize([], 5, 4, 9), np.full((4, 5), 9))

    def test_nested_inner_instance_visible(self):
        outer = InstanceContour(1, [(0, 0), (0, 7), (7, 7), (7, 0)])
        inner = InstanceContour(2, [(3, 3), (3, 4), (4, 4), (4, 3)])
        expected = np.ones((8, 8), np.uint16)
        expected[3:5, 3:5] = 2
        # paint order follows fill size, not input order
        assert np.array_equal(rasterize([inner, outer], 8, 8), expected)
        assert np.array_equal(rasterize([outer, inner], 8, 8), expected)

    def test_polygon_fill_against_flood_fill(self, rng):
        for _ in range(30):
            pts = rng.integers(0, 12, (int(rng.integers(1, 7)), 2))
            mask, r0, c0 = fill_mask(pts)
            got = {(r + r0, c + c0) for r, c in np.argwhere(mask).tolist()}
            from semvc.maps import _outline_pixels

            outline = _outline_pixels(np.asarray(pts, np.int64))
            assert got == flood_fill_oracle(outline.tolist(), 12, 12)

    def test_out_of_bounds_points_clip(self):
        c = InstanceContour(3, [(-2, -2), (-2, 3), (3, 3), (3, -2)])
        out = rasterize([c], 6, 6)
        expected = np.zeros((6, 6), np.uint16)
        expected[0:4, 0:4] = 3
        assert np.array_equal(out, expected)

    def test_degenerate_contour_rejected(self):
        with pytest.raises(ValueError):
            rasterize([InstanceContour(1, np.zeros((0, 2)))], 4, 4)


class TestProperties:
    def test_partition(self, rng):
        for _ in range(20):
            m = blob_map(rng, 16, 16)
            inst = extract_instances(m)
            assert sum(c.area for c in inst) == m.size
            comps = label_components(m)
            assert comps.ids.min() == 1  # every pixel in exactly one component

    def test_trace_validity(self, rng):
        for _ in range(30):
            m = blob_map(rng, 14, 17)
            for c in extract_instances(m):
                check_contour(c, m.shape)

    def test_outline_covers_every_exterior_facing_pixel(self, rng):
        for _ in range(30):
            m = blob_map(rng, 12, 12, n_labels=3)
            for comp, c in zip(brute_components(m), []):
                pass
            for c in extract_instances(m):
                pixels = {tuple(p) for p in c.points.tolist()}
                filled = flood_fill_oracle(list(pixels), *m.shape)
                assert len(filled) == c.enclosed_area

    @settings(max_examples=150, deadline=None)
    @given(
        st.integers(1, 14),
        st.integers(1, 14),
        st.integers(2, 5),
        st.integers(0, 2**32 - 1),
    )
    def test_lossless_loop(self, h, w, n_labels, seed):
        rng = np.random.default_rng(seed)
        m = blob_map(rng, h, w, n_labels)
        out = rasterize(extract_instances(m), w, h, background_label=0)
        assert np.array_equal(out, m)

    def test_lossless_loop_on_noise(self, rng):
        for _ in range(100):
            h, w = rng.integers(1, 16, 2)
            m = rng.integers(0, 3, (h, w)).astype(np.uint16)
            assert np.array_equal(rasterize(extract_instances(m), w, h), m)

    def test_square_helper_shape(self):
        assert square_map().sum() == 7 * 16
