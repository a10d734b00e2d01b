import math

import numpy as np
import pytest

import oracles as o
from gradcheck import check_params
from qdimred.liealg import gellmann_generators
from qdimred.models.autoencoders import (
    Autoencoder,
    BlochMap,
    IdentityMap,
    PolyMap,
    SUnMap,
    TrainingDivergence,
    ae_train,
    build_autoencoder,
    minibatches,
    poly_features,
)
from qdimred.models.pqae import (
    PqaeModel,
    make_batches,
    pqae_encode,
    pqae_forward,
    pqae_loss_and_grads,
    pqae_train,
    pqae_train_epoch,
)
from qdimred.models.vqc import (
    VqcModel,
    predict,
    vqc_evaluate,
    vqc_forward,
    vqc_loss_and_grad,
    vqc_train,
)
from qdimred.nn import LayerStack, LinearLayer, make_optimizer
from qdimred.qsim import AnsatzSpec, FeatureMapSpec, zz_feature_map_batch

AE_CASES = {
    "linear": dict(kind="linear", latent=3),
    "qae": dict(kind="qae", m=1),
    "qae_batched": dict(kind="qae", m=4),
    "qae_su3": dict(kind="qae", n=3, selection=[0, 2, 5, 7]),
    "bloch_qae": dict(kind="bloch_qae"),
    "poly": dict(kind="poly", poly_width=3),
    "poly2": dict(kind="poly", poly_width=2),
}


def zero_stack(in_dim, out_dim):
    return LayerStack([LinearLayer(np.zeros((out_dim, in_dim)), np.zeros(out_dim))])


class TestAutoencoderForward:
    def test_identity_linear(self, rng):
        ae = Autoencoder(LayerStack.identity([4, 4]), IdentityMap(4), LayerStack.identity([4, 4]))
        x = rng.normal(size=(3, 4))
        assert np.array_equal(ae.reconstruct(x), x)

    def test_zero_decoder_gives_bias(self, rng):
        dec = LayerStack([LinearLayer(np.zeros((4, 3)), np.array([1.0, 2.0, 3.0, 4.0]))])
        ae = Autoencoder(LayerStack.init([4, 3], rng), IdentityMap(3), dec)
        assert np.allclose(ae.reconstruct(rng.normal(size=(2, 4))), [1, 2, 3, 4])

    def test_zero_encoder_qae(self, rng):
        ae = Autoencoder(zero_stack(4, 12), SUnMap(2, m=4), LayerStack.init([16, 4], rng))
        _, F, _ = ae.forward(rng.normal(size=(3, 4)))
        assert np.allclose(F, np.tile([1, 0, 0, 0], (3, 4)), atol=1e-15)

    def test_qae_unit_norm_blocks(self, rng):
        for m, n in ((1, 2), (4, 2), (2, 3)):
            ae = build_autoencoder("qae", 5, rng, n=n, m=m)
            _, F, _ = ae.forward(rng.normal(size=(6, 5)) * 3)
            blocks = F.reshape(6, m, 2 * n)
            assert np.allclose(np.linalg.norm(blocks, axis=2), 1, atol=1e-10)

    def test_qae_matches_exponential_oracle(self, rng):
        ae = build_autoencoder("qae", 4, rng)
        x = rng.normal(size=(1, 4))
        z, _ = ae.encoder.layers[0].weights @ x[0] + ae.encoder.layers[0].bias, None
        U = o.expm_taylor(-1j * sum(zj * g for zj, g in zip(z, o.gellmann(2))))
        F = ae.forward(x)[1][0]
        assert np.allclose(F, [U[0, 0].real, U[0, 0].imag, U[1, 0].real, U[1, 0].imag], atol=1e-10)

    def test_bloch(self, rng):
        ae = Autoencoder(zero_stack(4, 2), BlochMap(), LayerStack.init([3, 4], rng))
        assert np.allclose(ae.forward(np.ones((1, 4)))[1], [[1, 0, 0]])
        ae = build_autoencoder("bloch_qae", 4, rng)
        F = ae.forward(rng.normal(size=(10, 4)) * 4)[1]
        assert np.allclose(np.linalg.norm(F, axis=1), 1, atol=1e-12)
        assert ae.latent_dim == 2

    def test_poly_values(self):
        assert np.array_equal(poly_features(np.array([[1.0, 1.0]]))[0], [[1, 1, 1]])
        assert np.array_equal(poly_features(np.array([[1.0, 1.0, 1.0]]))[0], [[1, 1, 1, 3]])
        f, _ = poly_features(np.array([[2.0, -3.0, 0.5]]))
        assert np.allclose(f, [[4, 9, 0.25, -6 + 1 - 1.5]])
        with pytest.raises(ValueError):
            poly_features(np.ones((1, 4)))

    def test_poly_jacobian(self, rng):
        for w in (2, 3):
            z = rng.normal(size=w)
            _, jac = poly_features(z[None])
            ref = o.central_diff(lambda v: poly_features(v[None])[0][0], z, 1e-6)
            assert np.allclose(jac[0], ref, atol=1e-8)

    def test_latent_rule(self, rng):
        assert build_autoencoder("qae", 4, rng).latent_dim == 3
        assert build_autoencoder("qae", 13, rng, m=4).latent_dim == 12
        # for n > 2 the layer after the map can be the narrowest
        assert build_autoencoder("qae", 8, rng, n=3, m=1).latent_dim == 6
        assert build_autoencoder("linear", 4, rng, latent=3, post_width=4).latent_dim == 3
        assert build_autoencoder("poly", 4, rng, poly_width=2).latent_dim == 2

    def test_width_errors(self, rng):
        with pytest.raises(ValueError):
            Autoencoder(LayerStack.init([4, 2], rng), SUnMap(2), LayerStack.init([4, 4], rng))
        with pytest.raises(ValueError):
            build_autoencoder("tree", 4, rng)
        with pytest.raises(ValueError):
            SUnMap(2, selection=[0, 0])
        ae = build_autoencoder("linear", 4, rng)
        with pytest.raises(ValueError):
            ae.forward(np.ones((1, 5)))
        with pytest.raises(ValueError):
            PolyMap(4)


@pytest.mark.parametrize("case", sorted(AE_CASES))
def test_autoencoder_gradients(case):
    rng = np.random.default_rng(11)
    kw = dict(AE_CASES[case])
    kind = kw.pop("kind")
    ae = build_autoencoder(kind, 5, rng, **kw)
    X = rng.normal(size=(8, 5))
    loss, grads = ae.loss_and_grads(X)
    err = check_params(lambda: ae.loss_and_grads(X)[0], ae.params(), grads, rng)
    assert err < 1e-4, err


class TestAeTraining:
    def test_lossless_capacity(self, rng):
        X = rng.normal(size=(30, 3))
        ae = build_autoencoder("linear", 3, rng, latent=3)
        hist = ae_train(ae, X, epochs=2000, optimizer="adam", lr=1e-2, batch_size=0)
        assert hist.train_mse[-1] < 1e-4

    def test_mostly_non_increasing(self, rng):
        X = rng.normal(size=(40, 4))
        X /= np.linalg.norm(X, axis=1, keepdims=True)
        ae = build_autoencoder("qae", 4, rng)
        hist = ae_train(ae, X, epochs=200, batch_size=0)
        steps = np.diff(hist.train_mse)
        assert np.mean(steps <= 0) >= 0.8

    def test_history_and_determinism(self, rng):
        X = rng.normal(size=(20, 4))
        runs = []
        for _ in range(2):
            ae = build_autoencoder("bloch_qae", 4, np.random.default_rng(3))
            runs.append(ae_train(ae, X, X[:5], epochs=15, seed=3))
        assert len(runs[0].train_mse) == len(runs[0].test_mse) == 15
        assert runs[0].train_mse == runs[1].train_mse
        assert runs[0].test_mse == runs[1].test_mse

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence(self, rng):
        X = rng.normal(size=(10, 3)) * 1e200
        ae = build_autoencoder("linear", 3, rng)
        with pytest.raises(TrainingDivergence):
            ae_train(ae, X, epochs=3)

    def test_width_mismatch(self, rng):
        with pytest.raises(ValueError):
            ae_train(build_autoencoder("linear", 3, rng), np.ones((4, 5)), epochs=1)

    def test_minibatches_cover(self, rng):
        b = minibatches(37, 16, rng)
        assert [len(x) for x in b] == [16, 16, 5]
        assert sorted(np.concatenate(b)) == list(range(37))
        assert len(minibatches(10, 0, rng)) == 1


def small_pqae(rng, N=5, n_q=2, n_d=3, M=8):
    return PqaeModel.init(N, FeatureMapSpec(n_q), n_d, rng, batch_size=M)


class TestPqae:
    def test_constraints(self, rng):
        with pytest.raises(ValueError):
            PqaeModel.init(5, FeatureMapSpec(3), 2, rng)
        with pytest.raises(ValueError):
            PqaeModel.init(5, FeatureMapSpec(2), 9, rng, batch_size=8)

    def test_degenerate_batch(self, rng):
        model = small_pqae(rng)
        X = np.tile(rng.normal(size=5), (8, 1))
        X_rec, P, _ = pqae_forward(model, X)
        assert np.allclose(P, 0, atol=1e-6)
        assert np.allclose(X_rec, model.decoder.layers[0].bias, atol=1e-5)
        loss, grads = pqae_loss_and_grads(model, X)
        assert np.isfinite(loss) and all(np.all(np.isfinite(g)) for g in grads)

    def test_gradient_full_pipeline(self):
        rng = np.random.default_rng(5)
        model = small_pqae(rng)
        X = rng.normal(size=(8, 5))
        loss, grads = pqae_loss_and_grads(model, X)
        err = check_params(lambda: pqae_loss_and_grads(model, X)[0], model.params(), grads, rng)
        assert err < 1e-4, err

    def test_encode(self, rng):
        model = small_pqae(rng)
        for layer in model.encoder.layers:
            layer.weights[...] = 0
            layer.bias[...] = 0
        assert np.array_equal(pqae_encode(model, rng.normal(size=(4, 5))), np.zeros((4, 2)))
        assert pqae_encode(small_pqae(rng), np.ones((3, 5))).shape == (3, 2)

    def test_batches(self, rng):
        sizes = [len(b) for b in make_batches(70, 32, 4, rng)]
        assert sizes == [32, 38]
        sizes = [len(b) for b in make_batches(100, 32, 2, rng)]
        assert sizes == [32, 32, 36] or sizes == [32, 32, 32, 4]
        assert sorted(np.concatenate(make_batches(70, 32, 4, rng))) == list(range(70))

    def test_epoch_reduces_loss(self, rng):
        model = small_pqae(rng)
        X = rng.uniform(size=(24, 5))
        hist = pqae_train(model, X, epochs=15, lr=2e-2, seed=0)
        assert hist.train_mse[-1] < hist.train_mse[0]

    def test_epoch_determinism(self, rng):
        X = rng.uniform(size=(20, 5))
        out = []
        for _ in range(2):
            m = small_pqae(np.random.default_rng(2))
            out.append(pqae_train_epoch(m, X, make_optimizer("adam", 1e-2), np.random.default_rng(0)))
        assert out[0] == out[1]


class TestVqc:
    def test_probabilities(self, rng):
        model = VqcModel.init(FeatureMapSpec(3), AnsatzSpec(3), 3, rng)
        P = vqc_forward(model, rng.normal(size=(7, 3)))
        assert np.allclose(P.sum(axis=1), 1, atol=1e-8)

    def test_identity_readout(self, rng):
        model = VqcModel.init(FeatureMapSpec(2), AnsatzSpec(2, reps=1), 4, rng)
        x = rng.normal(size=2)
        psi = o.real_amplitudes_unitary(model.theta, 2, 1) @ o.zz_unitary(x, 2) @ o.zero_state(2)
        assert np.allclose(vqc_forward(model, x[None])[0], np.abs(psi) ** 2, atol=1e-12)

    def test_zero_theta_oracle(self):
        model = VqcModel(FeatureMapSpec(2), AnsatzSpec(2, reps=3), np.zeros(8), 2)
        psi = o.zz_unitary([0.0, 0.0], 2) @ o.zero_state(2)
        p = np.abs(o.real_amplitudes_unitary(np.zeros(8), 2, 3) @ psi) ** 2
        expected = [p[0] + p[2], p[1] + p[3]]
        assert np.allclose(vqc_forward(model, np.zeros((1, 2)))[0], expected, atol=1e-12)

    def test_gradient(self):
        rng = np.random.default_rng(9)
        model = VqcModel.init(FeatureMapSpec(3), AnsatzSpec(3, reps=2), 3, rng)
        X = rng.normal(size=(8, 3))
        y = rng.integers(0, 3, size=8)
        states = zz_feature_map_batch(X, model.feature_map)
        loss, grad = vqc_loss_and_grad(model, states, y)
        err = check_params(lambda: vqc_loss_and_grad(model, states, y)[0], [model.theta], [grad], rng)
        assert err < 1e-4, err
        fd = o.central_diff(lambda t: vqc_loss_and_grad(VqcModel(model.feature_map, model.ansatz, t, 3), states, y)[0],
                            model.theta, 1e-5)
        assert np.allclose(grad, fd, atol=1e-7)

    def test_toy_training(self, rng):
        X = np.array([[0.0], [1.5]])
        y = np.array([0, 1])
        model = VqcModel.init(FeatureMapSpec(1, reps=1), AnsatzSpec(1, reps=1), 2, rng)
        hist = vqc_train(model, X, y, epochs=100, lr=0.1)
        assert hist.train_accuracy[-1] == 1.0
        assert len(hist.loss) == 100

    def test_evaluate(self, rng):
        model = VqcModel.init(FeatureMapSpec(2), AnsatzSpec(2), 2, rng)
        X = rng.normal(size=(12, 2))
        pred = predict(model, X)
        assert vqc_evaluate(model, X, pred) == 1.0
        assert vqc_evaluate(model, X, 1 - pred) == 0.0
        half = pred.copy()
        half[:6] = 1 - half[:6]
        assert vqc_evaluate(model, X, half) == 0.5
        assert vqc_evaluate(model, X, 1 - half) == 1 - 0.5

    def test_tie_break(self):
        # H|0> with an identity ansatz gives a 50/50 split
        model = VqcModel(FeatureMapSpec(1, reps=1), AnsatzSpec(1, reps=0), np.zeros(1), 2)
        assert predict(model, np.zeros((1, 1)))[0] == 0

    def test_errors(self, rng):
        with pytest.raises(ValueError):
            VqcModel.init(FeatureMapSpec(2), AnsatzSpec(3), 2, rng)
        with pytest.raises(ValueError):
            VqcModel.init(FeatureMapSpec(1), AnsatzSpec(1), 3, rng)
        model = VqcModel.init(FeatureMapSpec(2), AnsatzSpec(2), 2, rng)
        with pytest.raises(ValueError):
            vqc_train(model, np.zeros((2, 2)), np.array([0, 2]), epochs=1)
        with pytest.raises(ValueError):
            vqc_forward(model, np.zeros((1, 3)))
