import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import anisotropic_cloud
from struct2func.featurize import (
    GRID, N_CHANNELS, SITE_CHANNEL, TENSOR_SHAPE, BadMagic, DimMismatch, FeatureTensor, OutOfBounds,
    Oversize, UnknownAminoAcid, featurize_points, featurize_structure, property_vector, rasterize,
    read_tensor, write_tensor)
from struct2func.pdb_ingest import AMINO_ACIDS, parse_pdb
from struct2func.properties import COLUMNS, PROPERTY_TABLE
from struct2func.surface_depth import approximate_mesh
from struct2func.synthetic import SyntheticSpec, make_pdb_text

# Published table typed column by column, rows in the order ACDEFGHIKLMNPQRSTUVWY.
PUBLISHED_COLUMNS = {
    "hydrophobic_yes": "1 1 0 0 1 1 0 1 0 1 1 0 1 0 0 0 0 0 1 1 0",
    "pka": ".191 .156 .162 .171 .179 .191 .146 .189 .176 .189 .173 .174 .159 .176 .148 .178 .170 .155 .194 .200 .179",
    "polar_yes": "0 0 1 1 0 0 1 0 1 0 0 1 0 1 1 1 1 0 0 0 1",
    "acidic": "0 1 1 1 0 0 0 0 0 0 0 0 0 0 0 0 0 1 0 0 .3",
    "basic": "0 0 0 0 0 0 .3 0 .6 0 0 0 0 0 1 0 0 0 0 0 0",
    "small_yes": "1 1 1 0 0 1 0 0 0 0 0 1 1 0 0 1 1 1 1 0 0",
    "aromatic": "0 0 0 0 1 0 1 0 0 0 0 0 0 0 0 0 0 0 0 1 1",
    "aliphatic": "1 0 0 0 0 0 0 1 0 1 1 0 0 0 0 0 0 0 1 0 0",
    "avg_mass": ".436 .593 .652 .720 .809 .368 .760 .642 .716 .642 .731 .647 .564 .716 .853 .515 .583 .823 .574 1 .887",
    "pi": ".399 .278 0 .038 .334 .406 .601 .405 .853 .399 .365 .324 .436 .354 1 .358 .348 .331 .398 .384 .353",
    "pk1": ".833 .182 .288 .455 .606 .833 0 .788 .545 .803 .500 .515 .227 .561 .030 .591 .439 .167 .894 1 .606",
    "pk2": ".581 1 .596 .379 .298 .535 .308 .525 .172 .515 .283 0 .970 .207 .136 .247 .192 .646 .515 .348 .247",
    "essential_yes": "0 0 0 0 1 0 1 1 1 1 1 0 0 0 0 0 1 0 1 1 0",
    "essential_no": "1 0 1 0 0 0 0 0 0 0 0 1 1 1 0 1 0 1 0 0 0",
    "essential_conditional": "0 1 0 1 0 1 0 0 0 0 0 0 0 0 1 0 0 0 0 0 1",
    "mono_mass_ms": ".382 .554 .618 .693 .790 .306 .737 .608 .688 .608 .704 .613 .522 .688 .839 .468 .543 .811 .532 1 .876",
}
COMPLEMENTS = {"hydrophobic_no": "hydrophobic_yes", "polar_no": "polar_yes", "small_no": "small_yes"}


class TestPropertyTable:
    def test_published_columns(self):
        assert "".join(PROPERTY_TABLE) == AMINO_ACIDS
        for name, col in PUBLISHED_COLUMNS.items():
            k = COLUMNS.index(name)
            got = [PROPERTY_TABLE[a][k] for a in AMINO_ACIDS]
            np.testing.assert_allclose(got, [float(v) for v in col.split()], err_msg=name)
        for no, yes in COMPLEMENTS.items():
            for a in AMINO_ACIDS:
                assert PROPERTY_TABLE[a][COLUMNS.index(no)] == 1 - PROPERTY_TABLE[a][COLUMNS.index(yes)]

    def test_average_mass_ms_column(self):
        k, m = COLUMNS.index("avg_mass_ms"), COLUMNS.index("mono_mass_ms")
        differs = {a: PROPERTY_TABLE[a][k] for a in AMINO_ACIDS if PROPERTY_TABLE[a][k] != PROPERTY_TABLE[a][m]}
        assert differs == pytest.approx({"H": 0.736, "M": 0.705, "U": 0.806})

    def test_range(self):
        allv = np.stack(list(PROPERTY_TABLE.values()))
        assert allv.shape == (21, 20) and allv.min() >= 0 and allv.max() <= 1


class TestPropertyVector:
    def test_site_channel(self):
        v = property_vector("A", has_site=True)
        assert v.shape == (N_CHANNELS,) and v[SITE_CHANNEL] == 1.0
        assert property_vector("A")[SITE_CHANNEL] == 0.0

    def test_unknown(self):
        with pytest.raises(UnknownAminoAcid):
            property_vector("X")


class TestRasterize:
    def test_collision_takes_max(self):
        vecs = np.array([[1.0, 0.0], [0.0, 2.0]])
        g = rasterize([[3.2, 4.9], [3.7, 4.1]], [0, 1], vecs, size=8)
        assert g[3, 4].tolist() == [1.0, 2.0]
        assert g.sum() == 3.0

    def test_empty(self):
        assert not rasterize(np.zeros((0, 2)), [], np.ones((1, 3)), size=4).any()

    def test_out_of_bounds(self):
        with pytest.raises(OutOfBounds):
            rasterize([[4.0, 0.0]], [0], np.ones((1, 1)), size=4)
        with pytest.raises(OutOfBounds):
            rasterize([[-0.1, 0.0]], [0], np.ones((1, 1)), size=4)

    @given(st.lists(st.tuples(st.floats(0, 7.99), st.floats(0, 7.99)), min_size=1, max_size=25),
           st.randoms(use_true_random=False))
    def test_order_invariant(self, pts, rnd):
        vecs = np.random.default_rng(len(pts)).random((len(pts), 3))
        perm = list(range(len(pts)))
        rnd.shuffle(perm)
        a = rasterize(pts, range(len(pts)), vecs, size=8)
        b = rasterize([pts[i] for i in perm], perm, vecs, size=8)
        assert np.array_equal(a, b)


def _fixture_points(rng, n=80):
    pts = anisotropic_cloud(rng, n)
    codes = [AMINO_ACIDS[i % 20] for i in range(n)]
    sites = [i % 7 == 0 for i in range(n)]
    return pts, codes, sites


class TestFeaturize:
    def test_shape_and_site_count(self, rng):
        pts, codes, sites = _fixture_points(rng)
        t, prov = featurize_points(pts, codes, sites, resolution=2.0)
        assert t.shape == TENSOR_SHAPE and t.dtype == np.float32
        assert sum(prov["octant_counts"]) == len(pts)
        # each point lands on exactly one pixel in each of its octant's three planes
        assert int(t[..., SITE_CHANNEL].sum()) <= 3 * sum(sites)
        assert t[..., SITE_CHANNEL].any()
        assert set(np.unique(t[..., SITE_CHANNEL])) <= {0.0, 1.0}

    def test_deterministic(self, rng):
        pts, codes, sites = _fixture_points(rng)
        a, pa = featurize_points(pts, codes, sites, 2.0)
        b, pb = featurize_points(pts, codes, sites, 2.0)
        assert a.tobytes() == b.tobytes() and pa == pb

    def test_single_octant(self):
        # points already in canonical orientation with positive skew stay in one octant
        pts = np.array([[10, 4, 1], [-1, -1, -0.5], [-2, -1, 0.1], [-3, -0.5, -0.2],
                         [-4, 0.5, 0.3], [0, -2, 0.3]], dtype=float)
        t, prov = featurize_points(pts, list("ACDEFG"), [False] * 6, 2.25)
        assert sum(prov["octant_counts"]) == 6
        occupied = [k for k in range(8) if t[3 * k:3 * k + 3].any()]
        assert occupied == [k for k, c in enumerate(prov["octant_counts"]) if c]

    def test_oversize(self, rng):
        pts = anisotropic_cloud(rng, 50) * 30
        with pytest.raises(Oversize) as ei:
            featurize_points(pts, ["A"] * 50, [False] * 50, 2.25)
        assert ei.value.axis == "x" and ei.value.extent > GRID

    def test_from_structure(self):
        rec = parse_pdb(make_pdb_text(SyntheticSpec("3ABC", n_residues=40, seed=5, n_site=3)))
        mesh = approximate_mesh([a.position for a in rec.protein_atoms()])
        ft = featurize_structure(rec, mesh)
        assert ft.data.shape == TENSOR_SHAPE
        assert ft.provenance["n_surface_calpha"] > 0
        assert ft.provenance["pdb_id"] == "3ABC"


class TestTensorFiles:
    def test_round_trip(self, tmp_path, rng):
        data = rng.random((2, 4, 4, 3)).astype(np.float32)
        p = tmp_path / "x.s2ft"
        write_tensor(FeatureTensor(data, "X"), p)
        back = read_tensor(p, expected_shape=(2, 4, 4, 3))
        assert np.array_equal(back.data, data) and back.pdb_id == "x"

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "y.s2ft"
        p.write_bytes(b"NOPE" + bytes(40))
        with pytest.raises(BadMagic):
            read_tensor(p)

    def test_dim_mismatch(self, tmp_path):
        p = tmp_path / "z.s2ft"
        write_tensor(FeatureTensor(np.zeros((1, 2, 2, 1), np.float32)), p)
        with pytest.raises(DimMismatch):
            read_tensor(p)
        p.write_bytes(p.read_bytes()[:-4])
        with pytest.raises(DimMismatch):
            read_tensor(p, expected_shape=(1, 2, 2, 1))

    def test_write_rejects_wrong_rank(self, tmp_path):
        with pytest.raises(DimMismatch):
            write_tensor(FeatureTensor(np.zeros((2, 2))), tmp_path / "w.s2ft")
