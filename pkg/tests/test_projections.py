import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from projphase import io
from projphase.errors import (
    DimensionMismatch,
    InvalidRank,
    InvariantError,
    RankDeficientBasis,
    SchemaError,
)
from projphase.projections import (
    Projection,
    ProjectionCollection,
    Subspace,
    basis_expansion,
    complement,
    projection_from_basis,
    random_ranks,
    sample_collection,
    sample_grassmannian,
    validate,
)
from projphase.rng import substream


def test_coordinate_axis_and_plane():
    P = projection_from_basis(np.array([[1.0], [0.0], [0.0]]))
    np.testing.assert_array_equal(P.matrix, np.diag([1.0, 0.0, 0.0]))
    assert P.rank == 1
    Q = projection_from_basis(np.eye(3)[:, :2])
    np.testing.assert_allclose(Q.matrix, np.diag([1.0, 1.0, 0.0]), atol=1e-15)


def test_diagonal_line():
    P = projection_from_basis(np.array([[1.0], [1.0]]))
    v = np.array([1.0, 1.0])
    np.testing.assert_allclose(P.matrix, np.outer(v, v) / (v @ v), atol=1e-15)


def test_rank_deficient_basis():
    with pytest.raises(RankDeficientBasis):
        projection_from_basis(np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]]))


@pytest.mark.parametrize("M,k", [(3, 1), (3, 2), (7, 4)])
def test_sample_grassmannian_invariants(M, k):
    P = sample_grassmannian(M, k, substream(11, M, k))
    A = P.matrix
    assert P.rank == k
    assert validate(P) == []
    assert np.max(np.abs(A @ A - A)) <= 1e-10
    assert np.max(np.abs(A - A.T)) <= 1e-12
    assert abs(np.trace(A) - k) <= 1e-10


def test_sampling_is_reproducible():
    a = sample_grassmannian(5, 2, substream(3))
    b = sample_grassmannian(5, 2, substream(3))
    assert a.matrix.tobytes() == b.matrix.tobytes()
    assert sample_collection(4, [1, 2, 3], substream(9)) == sample_collection(4, [1, 2, 3], substream(9))


@pytest.mark.parametrize("k", [0, 3, -1])
def test_invalid_rank(k):
    with pytest.raises(InvalidRank):
        sample_grassmannian(3, k, substream(0))


def test_complement():
    P = projection_from_basis(np.array([[1.0], [0.0], [0.0]]))
    np.testing.assert_array_equal(complement(P).matrix, np.diag([0.0, 1.0, 1.0]))
    Q = sample_grassmannian(6, 2, substream(5))
    C = complement(Q)
    assert C.rank == 4
    assert int(np.sum(np.linalg.eigvalsh(C.matrix) > 0.5)) == 4
    assert complement(C) == Q


def test_validate_examples():
    assert validate(np.diag([1.0, 0.0]), rank=1) == []
    assert validate(np.array([[1.0, 1.0], [0.0, 0.0]]), rank=1) == ["symmetry"]
    bad = validate(np.diag([0.5, 0.5]))
    assert "idempotency" in bad and "trace" in bad
    assert "eigenvalues" in bad
    assert validate(np.diag([0.0, 1.0, 1.0])) == []
    with pytest.raises(DimensionMismatch):
        validate(np.ones((2, 3)))


def test_projection_rejects_non_projection():
    with pytest.raises(InvariantError) as info:
        Projection(np.diag([0.5, 0.5]), 1)
    assert "idempotency" in info.value.violations


def test_projection_matrix_is_read_only():
    P = sample_grassmannian(3, 1, substream(1))
    with pytest.raises(ValueError):
        P.matrix[0, 0] = 2.0


def test_subspace_and_generator():
    S = Subspace(np.array([[0.6], [0.8]]))
    P = S.projection()
    g = P.generator()
    assert abs(abs(g @ np.array([0.6, 0.8])) - 1.0) < 1e-14
    assert S.dim == 1


@settings(max_examples=40, deadline=None)
@given(
    M=st.integers(2, 8),
    data=st.data(),
)
def test_basis_invariance(M, data):
    k = data.draw(st.integers(1, M - 1))
    seed = data.draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((M, k))
    T = rng.standard_normal((k, k)) + 3 * np.eye(k)
    P1 = projection_from_basis(B)
    P2 = projection_from_basis(B @ T)
    assert np.max(np.abs(P1.matrix - P2.matrix)) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(M=st.integers(2, 10), seed=st.integers(0, 2**32 - 1), data=st.data())
def test_sampled_projections_are_valid(M, seed, data):
    k = data.draw(st.integers(1, M - 1))
    P = sample_grassmannian(M, k, np.random.default_rng(seed))
    assert validate(P) == []


def test_collection_basics():
    c = sample_collection(3, [1, 2, 2], substream(4), seed=4)
    assert c.ambient_dim == 3 and c.count == 3 and c.ranks == [1, 2, 2]
    assert c.stack.shape == (3, 3, 3)
    assert c.provenance["ranks"] == [1, 2, 2]
    assert [p.rank for p in c.complements()] == [2, 1, 1]
    assert len(c.fingerprint()) == 16
    with pytest.raises(InvalidRank):
        sample_collection(3, [1, 3], substream(0))


def test_random_ranks_in_range():
    r = random_ranks(5, 200, substream(2))
    assert min(r) >= 1 and max(r) <= 4 and len(r) == 200


def test_basis_expansion_is_rank_one():
    c = sample_collection(4, [1, 2, 3], substream(8))
    lines = basis_expansion(c)
    assert lines.is_rank_one() and lines.count == 6
    np.testing.assert_allclose(
        sum(p.matrix for p in lines), sum(p.matrix for p in c), atol=1e-12
    )


def test_round_trip_is_bitwise(tmp_path):
    c = sample_collection(5, [1, 2, 3, 4, 2], substream(21), seed=21)
    path = tmp_path / "c.json"
    io.save_collection(c, path)
    back = io.load_collection(path)
    for a, b in zip(c, back):
        assert a.matrix.tobytes() == b.matrix.tobytes()
        assert a.rank == b.rank
    assert back.provenance == c.provenance


def test_empty_document_is_schema_error():
    with pytest.raises(SchemaError) as info:
        io.collection_from_dict({"ambient_dim": 3, "projections": []})
    assert info.value.path == "projections"


def test_schema_error_paths():
    doc = io.collection_to_dict(sample_collection(2, [1, 1], substream(0)))
    doc["projections"][1]["matrix"][0][1] = "x"
    with pytest.raises(SchemaError) as info:
        io.collection_from_dict(doc)
    assert info.value.path == "projections[1].matrix[0][1]"
    doc = io.collection_to_dict(sample_collection(2, [1], substream(0)))
    doc["projections"][0]["rank"] = 2
    with pytest.raises(SchemaError) as info:
        io.collection_from_dict(doc)
    assert info.value.path == "projections[0].rank"
    with pytest.raises(SchemaError):
        io.collection_from_dict({"ambient_dim": 3, "projections": [], "provenance": {"seed": -1}})


def test_idempotency_failure_is_invariant_error():
    A = np.diag([1.0, 0.0, 0.0])
    A[0, 0] += 1e-2
    doc = {"ambient_dim": 3, "projections": [{"rank": 1, "matrix": A.tolist()}]}
    with pytest.raises(InvariantError) as info:
        io.collection_from_dict(doc)
    assert "idempotency" in info.value.violations


def test_collection_rejects_mixed_dimensions():
    with pytest.raises(DimensionMismatch):
        ProjectionCollection(
            (sample_grassmannian(2, 1, substream(0)), sample_grassmannian(3, 1, substream(0)))
        )
