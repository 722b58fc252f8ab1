import numpy as np
import pytest

from actionseg.data import FeatureSequence
from actionseg.errors import DataError
from actionseg.features import (
    FrameEncoder,
    FvEncoderConfig,
    PcaModel,
    apply_pca,
    encode_clip,
    encode_fv,
    fisher_vector,
    fit_fv_codebook,
    fit_pca,
    load_encoder,
    save_encoder,
    window_fv_matrix,
)
from helpers import random_gmm


def manual_fisher_vector(X: np.ndarray, gmm) -> np.ndarray:
    """Reference FV computed from the textbook formulas, one frame at a
    time, with responsibilities evaluated from scratch."""
    K, d = gmm.n_components, gmm.dim
    log_comp = np.empty((X.shape[0], K))
    for k in range(K):
        diff = X - gmm.means[k]
        log_comp[:, k] = (
            np.log(gmm.weights[k])
            - 0.5 * np.sum(np.log(2.0 * np.pi * gmm.variances[k]))
            - 0.5 * np.sum(diff * diff / gmm.variances[k], axis=1)
        )
    shift = log_comp.max(axis=1, keepdims=True)
    gamma = np.exp(log_comp - shift)
    gamma /= gamma.sum(axis=1, keepdims=True)
    fv = np.zeros(2 * K * d)
    for k in range(K):
        z = (X - gmm.means[k]) / np.sqrt(gmm.variances[k])
        g_mu = (gamma[:, k : k + 1] * z).mean(axis=0) / np.sqrt(gmm.weights[k])
        g_var = (gamma[:, k : k + 1] * (z * z - 1.0)).mean(axis=0) / np.sqrt(
            2.0 * gmm.weights[k]
        )
        fv[2 * k * d : (2 * k + 1) * d] = g_mu
        fv[(2 * k + 1) * d : (2 * k + 2) * d] = g_var
    return fv


def test_fit_pca_matches_eigendecomposition():
    rng = np.random.default_rng(50)
    X = rng.normal(size=(200, 4)) @ np.diag([3.0, 2.0, 1.0, 0.5])
    model = fit_pca(X, 2)
    assert model.out_dim == 2
    proj = apply_pca(model, X)
    evals = np.sort(np.linalg.eigvalsh(np.cov(X.T, bias=True)))[::-1]
    assert proj.var(axis=0, ddof=0) == pytest.approx(evals[:2], rel=1e-8)
    # retained directions are uncorrelated and ordered by variance
    cov = np.cov(proj.T, bias=True)
    assert abs(cov[0, 1]) < 1e-8
    assert cov[0, 0] >= cov[1, 1]


def test_fit_pca_full_dimension_reconstructs():
    rng = np.random.default_rng(51)
    X = rng.normal(size=(40, 3))
    model = fit_pca(X, 3)
    proj = apply_pca(model, X)
    back = proj @ model.basis.T + model.mean
    np.testing.assert_allclose(back, X, atol=1e-9)


def test_fit_pca_sign_convention_and_determinism():
    rng = np.random.default_rng(52)
    X = rng.normal(size=(60, 5))
    a = fit_pca(X, 3)
    b = fit_pca(X.copy(), 3)
    np.testing.assert_array_equal(a.basis, b.basis)
    for j in range(a.out_dim):
        col = a.basis[:, j]
        assert col[np.argmax(np.abs(col))] > 0


def test_fit_pca_rank_and_argument_errors():
    rng = np.random.default_rng(53)
    line = np.outer(rng.normal(size=30), np.array([1.0, 2.0, -1.0]))
    with pytest.raises(DataError):
        fit_pca(line, 2)
    X = rng.normal(size=(10, 2))
    with pytest.raises(DataError):
        fit_pca(X, 3)
    with pytest.raises(DataError):
        fit_pca(X, 0)
    with pytest.raises(DataError):
        fit_pca(np.array([[1.0, np.nan]]), 1)


def test_pca_model_validation_and_round_trip():
    with pytest.raises(DataError):
        PcaModel(mean=np.zeros(2), basis=np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(DataError):
        PcaModel(mean=np.zeros(2), basis=np.eye(3))
    model = fit_pca(np.random.default_rng(54).normal(size=(30, 3)), 2)
    back = PcaModel.from_dict(model.to_dict())
    np.testing.assert_array_equal(back.mean, model.mean)
    np.testing.assert_array_equal(back.basis, model.basis)
    with pytest.raises(DataError):
        apply_pca(model, np.zeros((4, 5)))


def test_fisher_vector_matches_manual_formula():
    rng = np.random.default_rng(55)
    for _ in range(10):
        K = int(rng.integers(1, 4))
        d = int(rng.integers(1, 4))
        gmm = random_gmm(rng, K, d)
        X = rng.normal(size=(int(rng.integers(1, 12)), d))
        want = manual_fisher_vector(X, gmm)
        np.testing.assert_allclose(fisher_vector(X, gmm), want, atol=1e-10)
        np.testing.assert_allclose(
            fisher_vector(X, gmm, signed_sqrt=True),
            np.sign(want) * np.sqrt(np.abs(want)),
            atol=1e-10,
        )


def test_fisher_vector_empty_input():
    gmm = random_gmm(np.random.default_rng(56), 2, 2)
    with pytest.raises(DataError):
        fisher_vector(np.zeros((0, 2)), gmm)


def test_encode_fv_window_clamps_to_clip():
    rng = np.random.default_rng(57)
    gmm = random_gmm(rng, 2, 2)
    X = rng.normal(size=(10, 2))
    cfg = FvEncoderConfig(gmm=gmm, window=4)
    # the window starts two frames before t and is cut at the clip edges
    for t, lo, hi in [(0, 0, 1), (2, 0, 3), (5, 3, 6), (9, 7, 9)]:
        want = fisher_vector(X[lo : hi + 1], gmm)
        np.testing.assert_allclose(encode_fv(X, cfg, t), want, atol=1e-12)
    with pytest.raises(DataError):
        encode_fv(X, cfg, 10)
    with pytest.raises(DataError):
        encode_fv(X, cfg, -1)
    with pytest.raises(DataError):
        FvEncoderConfig(gmm=gmm, window=0)


def test_window_fv_matrix_equals_per_frame_encoding():
    rng = np.random.default_rng(58)
    gmm = random_gmm(rng, 3, 2)
    X = rng.normal(size=(17, 2))
    for signed in (False, True):
        cfg = FvEncoderConfig(gmm=gmm, window=5, signed_sqrt=signed)
        mat = window_fv_matrix(X, None, cfg)
        assert mat.shape == (17, cfg.out_dim)
        for t in range(17):
            np.testing.assert_allclose(mat[t], encode_fv(X, cfg, t), atol=1e-10)


def test_window_fv_matrix_with_pca_and_none_stages():
    rng = np.random.default_rng(59)
    X = rng.normal(size=(20, 4))
    pca = fit_pca(X, 2)
    np.testing.assert_array_equal(window_fv_matrix(X, None, None), X)
    np.testing.assert_allclose(window_fv_matrix(X, pca, None), apply_pca(pca, X))
    gmm = random_gmm(rng, 2, 2)
    cfg = FvEncoderConfig(gmm=gmm, window=3)
    proj = apply_pca(pca, X)
    np.testing.assert_allclose(
        window_fv_matrix(X, pca, cfg), window_fv_matrix(proj, None, cfg), atol=1e-12
    )


def test_encode_clip_full_chain():
    rng = np.random.default_rng(60)
    seq = FeatureSequence(rng.normal(size=(25, 4)), frame_rate=30.0, clip_id="c9")
    pca1 = fit_pca(seq.frames, 3)
    gmm = random_gmm(rng, 2, 3)
    cfg = FvEncoderConfig(gmm=gmm, window=6)
    mid = window_fv_matrix(seq.frames, pca1, cfg)
    pca2 = fit_pca(mid, 4)
    out = encode_clip(seq, pca1, cfg, pca2)
    assert out.clip_id == "c9" and out.frame_rate == 30.0
    want = apply_pca(pca2, mid)
    want = want / np.sqrt(np.sum(want * want, axis=0))
    np.testing.assert_allclose(out.frames, want, atol=1e-12)
    norms = np.sqrt(np.sum(out.frames ** 2, axis=0))
    np.testing.assert_allclose(norms, 1.0, atol=1e-12)


def test_encode_clip_normalizes_even_without_stages():
    frames = np.array([[3.0, 0.0], [4.0, 0.0]])
    out = encode_clip(frames, None, None, None)
    np.testing.assert_allclose(out.frames[:, 0], [0.6, 0.8], atol=1e-12)
    # an all-zero dimension is left at zero rather than dividing by zero
    np.testing.assert_array_equal(out.frames[:, 1], [0.0, 0.0])


def test_fit_fv_codebook_deterministic_and_capped():
    rng = np.random.default_rng(61)
    arrays = [rng.normal(size=(80, 2)), rng.normal(size=(70, 2)) + 3.0]
    a = fit_fv_codebook(arrays, K=2, seed=5, sample_cap=100)
    b = fit_fv_codebook([x.copy() for x in arrays], K=2, seed=5, sample_cap=100)
    assert a == b
    c = fit_fv_codebook(arrays, K=2, seed=6, sample_cap=100)
    assert a != c
    full = fit_fv_codebook(arrays, K=2, seed=5)
    assert full.n_components == 2


def test_encoder_round_trip(tmp_path):
    rng = np.random.default_rng(62)
    X = rng.normal(size=(40, 3))
    pca1 = fit_pca(X, 2)
    gmm = random_gmm(rng, 2, 2)
    enc = FrameEncoder(
        pca1=pca1,
        fv=FvEncoderConfig(gmm=gmm, window=7, signed_sqrt=True),
        pca2=None,
        codebook_seed=11,
    )
    p = tmp_path / "encoder.json"
    save_encoder(p, enc)
    back = load_encoder(p)
    assert back.codebook_seed == 11
    assert back.pca2 is None
    assert back.fv.window == 7 and back.fv.signed_sqrt is True
    assert back.fv.gmm == gmm
    np.testing.assert_array_equal(back.pca1.basis, pca1.basis)
    seq = FeatureSequence(X[:15])
    np.testing.assert_array_equal(enc.encode(seq).frames, back.encode(seq).frames)


def test_load_encoder_rejects_other_files(tmp_path):
    p = tmp_path / "other.json"
    p.write_text("{\"format\": \"hmm-set\"}\n")
    with pytest.raises(DataError):
        load_encoder(p)
