"""The differentiation engine against its finite-difference oracle."""

import numpy as np
import pytest

from cvnet import autodiff as ad
from cvnet import nn  # registers the activation ops
from cvnet.complex_ops import make_rng, sample_circular_gaussian


def scalar(z):
    return np.asarray(z, dtype=complex)


class TestNumericOracle:
    def test_square_is_holomorphic(self):
        pair = ad.wirtinger_pair_numeric(lambda z: z * z, scalar(1 + 1j))
        assert pair.j.ravel()[0] == pytest.approx(2 + 2j, abs=1e-7)
        assert abs(pair.jc.ravel()[0]) < 1e-7

    def test_real_part(self):
        pair = ad.wirtinger_pair_numeric(lambda z: z.real.astype(complex), scalar(0.4 - 2j))
        assert pair.j.ravel()[0] == pytest.approx(0.5, abs=1e-9)
        assert pair.jc.ravel()[0] == pytest.approx(0.5, abs=1e-9)

    def test_squared_magnitude_pair(self):
        # d(z zbar)/dz = zbar and d(z zbar)/dzbar = z
        z0 = 2 + 3j
        pair = ad.wirtinger_pair_numeric(lambda z: z * np.conj(z), scalar(z0))
        assert pair.j.ravel()[0] == pytest.approx(np.conj(z0), abs=1e-6)
        assert pair.jc.ravel()[0] == pytest.approx(z0, abs=1e-6)

    def test_nonfinite_probe_reported(self):
        def f(z):
            with np.errstate(divide="ignore", invalid="ignore"):
                return 1.0 / (z - (1 + 1j))

        with pytest.raises(ad.EvaluationError, match="probe"):
            ad.wirtinger_pair_numeric(f, scalar(1 + 1j))

    def test_eps_must_be_positive(self):
        with pytest.raises(ValueError):
            ad.wirtinger_pair_numeric(lambda z: z, scalar(0j), eps=0.0)


class TestComposePairs:
    def test_holomorphic_composition_stays_holomorphic(self):
        inner = ad.JacobianPair.holomorphic(np.array([[2 + 1j]]))
        outer = ad.JacobianPair.holomorphic(np.array([[0.5 - 3j]]))
        composed = ad.compose_pairs(outer, inner)
        assert np.all(composed.jc == 0)

    def test_worked_example_matches_oracle(self):
        # outer w -> w conj(w) after inner z -> conj(z) is z -> z conj(z);
        # the oracle fixes (J, Jc) = (conj(z0), z0) at z0 = 2+3i.
        z0 = 2 + 3j
        w = np.conj(z0)
        outer = ad.JacobianPair(np.array([[np.conj(w)]]), np.array([[w]]))
        inner = ad.JacobianPair(np.array([[0j]]), np.array([[1 + 0j]]))
        composed = ad.compose_pairs(outer, inner)
        assert composed.j.ravel()[0] == pytest.approx(2 - 3j, abs=1e-12)
        assert composed.jc.ravel()[0] == pytest.approx(2 + 3j, abs=1e-12)
        oracle = ad.wirtinger_pair_numeric(lambda z: z * np.conj(z), scalar(z0))
        assert composed.j.ravel()[0] == pytest.approx(oracle.j.ravel()[0], rel=1e-5)
        assert composed.jc.ravel()[0] == pytest.approx(oracle.jc.ravel()[0], rel=1e-5)

    @pytest.mark.parametrize("case", range(10))
    def test_random_scalar_chains_match_oracle(self, case):
        # depth-3 chains over the registered ops vs the oracle of the
        # literal composition
        names = sorted(ad.REGISTRY)
        rng = make_rng(case, 31)
        chain = [names[int(rng.integers(len(names)))] for _ in range(3)]
        z0 = 0.7 * sample_circular_gaussian(rng, (), 1.0)

        def apply_chain(z):
            for name in chain:
                z = ad.REGISTRY[name].fn(z)
            return z

        z = scalar(z0)
        pair = ad.pair_at(chain[0], z)
        value = ad.REGISTRY[chain[0]].fn(z)
        for name in chain[1:]:
            pair = ad.compose_pairs(ad.pair_at(name, value), pair)
            value = ad.REGISTRY[name].fn(value)
        oracle = ad.wirtinger_pair_numeric(apply_chain, z)
        np.testing.assert_allclose(pair.j, oracle.j, rtol=1e-5, atol=1e-6)
        np.testing.assert_allclose(pair.jc, oracle.jc, rtol=1e-5, atol=1e-6)

    def test_shape_mismatch(self):
        a = ad.JacobianPair.holomorphic(np.zeros((2, 3)))
        b = ad.JacobianPair.holomorphic(np.zeros((2, 3)))
        with pytest.raises(ad.DimensionError):
            ad.compose_pairs(a, b)

    def test_pair_shapes_must_agree(self):
        with pytest.raises(ad.DimensionError):
            ad.JacobianPair(np.zeros((2, 2)), np.zeros((3, 3)))


class TestBackward:
    def test_squared_magnitude_gradient_is_exact(self):
        z = ad.Var(scalar(2 + 3j))
        store = ad.backward(ad.sum_abs2(z))
        assert store[z] == scalar(2 + 3j)  # machine exact

    def test_gradient_at_stationary_point_is_exactly_zero(self):
        z = ad.Var(scalar(0j))
        ad.backward(ad.sum_abs2(z))
        assert z.grad == 0

    def test_tanh_magnitude_loss_at_zero(self):
        z = ad.Var(scalar(0j))
        ad.backward(ad.sum_abs2(nn.ctanh(z)))
        assert z.grad == 0

    def test_seed_stored_at_root(self):
        z = ad.Var(scalar(1 + 1j))
        loss = ad.sum_abs2(z)
        store = ad.backward(loss)
        assert store[loss] == 1.0

    def test_two_layer_network_matches_oracle(self):
        rng = make_rng(17)
        arrays = {
            "w1": 0.6 * sample_circular_gaussian(rng, (3, 4), 1.0),
            "b1": 0.3 * sample_circular_gaussian(rng, (3, 1), 1.0),
            "w2": 0.6 * sample_circular_gaussian(rng, (2, 3), 1.0),
            "b2": 0.3 * sample_circular_gaussian(rng, (2, 1), 1.0),
        }
        x = sample_circular_gaussian(rng, (4, 1), 1.0)
        t = sample_circular_gaussian(rng, (2, 1), 1.0)

        def loss_of(params):
            pv = {k: ad.Var(v) for k, v in params.items()}
            h = nn.ctanh(pv["w1"] @ ad.Var(x) + pv["b1"])
            out = pv["w2"] @ h + pv["b2"]
            return ad.mse(out, t, 2 * t.size), pv

        loss, pv = loss_of(arrays)
        ad.backward(loss)
        for name in arrays:
            def f(tensor, _n=name):
                trial = dict(arrays)
                trial[_n] = tensor
                return loss_of(trial)[0].value

            oracle = ad.wirtinger_pair_numeric(f, arrays[name])
            got = pv[name].grad
            np.testing.assert_allclose(
                got, oracle.jc.reshape(got.shape), rtol=1e-5, atol=1e-8
            )

    def test_rejects_non_real_root(self):
        z = ad.Var(scalar(1 + 2j))
        with pytest.raises(ad.GradientContractError, match="real-valued"):
            ad.backward(z * z)

    def test_rejects_non_scalar_root(self):
        z = ad.Var(np.ones(3, dtype=complex))
        with pytest.raises(ad.GradientContractError, match="scalar"):
            ad.backward(z)

    def test_nan_gradient_names_node(self):
        with np.errstate(over="ignore", invalid="ignore"):
            z = ad.Var(scalar(1e200 + 0j))
            loss = ad.sum_abs2(z * z)  # overflows on the way down
            with pytest.raises((ad.NumericError, ad.GradientContractError)):
                ad.backward(loss)

    def test_grad_shapes_match_values(self):
        rng = make_rng(21)
        w = ad.Var(sample_circular_gaussian(rng, (3, 5), 1.0))
        x = ad.Var(sample_circular_gaussian(rng, (5, 2), 1.0))
        b = ad.Var(sample_circular_gaussian(rng, (3, 1), 1.0))
        loss = ad.mse(w @ x + b, np.zeros((3, 2)), 12)
        store = ad.backward(loss)
        for var in (w, x, b):
            assert store[var].shape == var.value.shape


class TestDualChannel:
    def _graph(self, warr, x, t, act):
        w = ad.Var(warr)
        out = act(w @ ad.Var(x))
        return w, ad.mse(out, t, 2 * t.size)

    @pytest.mark.parametrize("act", [nn.ctanh, nn.split_magnitude, lambda v: ad.conj(v)])
    def test_single_channel_equals_dual(self, act):
        rng = make_rng(33)
        warr = 0.7 * sample_circular_gaussian(rng, (3, 4), 1.0)
        x = sample_circular_gaussian(rng, (4, 2), 1.0)
        t = sample_circular_gaussian(rng, (3, 2), 1.0)
        w1, loss1 = self._graph(warr, x, t, act)
        s1 = ad.backward(loss1)
        w2, loss2 = self._graph(warr, x, t, act)
        s2 = ad.backward_dual(loss2)
        np.testing.assert_array_equal(s1[w1], s2[w2])

    def test_symmetry_check_passes_on_real_loss(self):
        rng = make_rng(34)
        z = ad.Var(sample_circular_gaussian(rng, 4, 1.0))
        loss = ad.sum_abs2(nn.split_magnitude(ad.conj(z)))
        ad.backward_dual(loss, symmetry_rtol=1e-10)  # must not raise

    def test_gradients_conjugate_pair_at_leaves(self):
        # dL/dz = conj(dL/dzbar) for a real loss; the dual path exposes both
        rng = make_rng(35)
        arr = sample_circular_gaussian(rng, 3, 1.0)
        z1 = ad.Var(arr)
        single = ad.backward(ad.sum_abs2(nn.ctanh(z1)))[z1]
        # oracle gamma channel: numeric J row of the scalar loss
        def f(u):
            return np.sum(np.abs(np.tanh(u)) ** 2).astype(complex)

        oracle = ad.wirtinger_pair_numeric(f, arr)
        np.testing.assert_allclose(np.conj(single), oracle.j.ravel(), rtol=1e-6, atol=1e-9)


class TestVjpAgainstMaterializedPairs:
    @pytest.mark.parametrize("chain", [
        ("ctanh", "split_magnitude"),
        ("square", "conj"),
        ("split_magnitude", "re", "ctanh"),
        ("linear", "abs2"),
    ])
    def test_backward_equals_composed_pairs_times_seed(self, chain):
        rng = make_rng(sum(map(len, chain)))
        z0 = 0.6 * sample_circular_gaussian(rng, 4, 1.0)

        # graph path
        z = ad.Var(z0)
        v = z
        for name in chain:
            v = ad.elementwise(v, name)
        loss = ad.sum_abs2(v)
        store = ad.backward(loss)

        # materialized path: compose analytic pairs, then the loss row
        pair = ad.pair_at(chain[0], z0)
        value = ad.REGISTRY[chain[0]].fn(z0)
        for name in chain[1:]:
            pair = ad.compose_pairs(ad.pair_at(name, value), pair)
            value = ad.REGISTRY[name].fn(value)
        loss_pair = ad.JacobianPair(
            np.conj(value)[None, :], value[None, :]
        )  # d(sum w conj w)/dw rows
        total = ad.compose_pairs(loss_pair, pair)
        np.testing.assert_allclose(
            store[z], total.jc.ravel(), rtol=1e-10, atol=1e-12
        )


class TestHolomorphyClassification:
    def probes(self, radius=0.8, count=100):
        rng = make_rng(55)
        return [radius * sample_circular_gaussian(rng, (), 1.0) for _ in range(count)]

    def test_tanh_holomorphic_inside_unit_disk(self):
        assert ad.is_holomorphic_numeric(nn.ctanh_values, self.probes())

    def test_magnitude_squasher_not_holomorphic(self):
        assert not ad.is_holomorphic_numeric(nn.split_magnitude_values, self.probes())

    def test_real_part_not_holomorphic(self):
        assert not ad.is_holomorphic_numeric(lambda z: z.real.astype(complex), self.probes())

    def test_empty_probes_rejected(self):
        with pytest.raises(ValueError):
            ad.is_holomorphic_numeric(lambda z: z, [])


def test_unbroadcast_sums_broadcast_axes():
    arr = np.ones((3, 4), dtype=complex)
    out = ad._unbroadcast(arr, (3, 1))
    assert out.shape == (3, 1)
    assert np.all(out == 4)
