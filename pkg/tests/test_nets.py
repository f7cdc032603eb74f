import json
import struct

import numpy as np
import pytest

from advreg.errors import ConfigurationError, CorruptionError, DimensionError, FormatError
from advreg.nets import (
    MAGIC,
    NetSpec,
    Network,
    build_network,
    clip_weights,
    discriminator_spec,
    generate,
    generator_spec,
    load_checkpoint,
    save_checkpoint,
)


class TestSpecs:
    def test_generator_defaults(self):
        spec = generator_spec(cond_dim=1, noise_dim=10)
        assert spec.input_dim == 11
        assert spec.out_dim == 1
        assert spec.layers == ((256, "relu"), (128, "relu"), (64, "relu"), (1, "identity"))
        assert spec.role == "generator" and spec.cond_dim == 1

    def test_discriminator_bivariate(self):
        spec = discriminator_spec(2)
        assert spec.input_dim == 2
        assert spec.layers == ((256, "leaky_relu"), (256, "leaky_relu"), (256, "leaky_relu"), (1, "sigmoid"))
        assert spec.leaky_slope == 0.2

    def test_critic_has_linear_output(self):
        spec = discriminator_spec(2, critic=True)
        assert spec.role == "critic" and spec.layers[-1] == (1, "identity")

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(input_dim=2, layers=(), role="generator"),
            dict(input_dim=2, layers=((0, "relu"),), role="generator"),
            dict(input_dim=0, layers=((1, "relu"),), role="generator"),
            dict(input_dim=2, layers=((1, "relu"),), role="encoder"),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            NetSpec(**kwargs)

    def test_dict_round_trip(self):
        spec = generator_spec(5, 3, widths=(8, 4))
        assert NetSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec


class TestBuild:
    def test_same_seed_same_parameters(self):
        spec = generator_spec(1, 10)
        a, b = build_network(spec, 7), build_network(spec, 7)
        for k in a.params:
            np.testing.assert_array_equal(a.params[k], b.params[k])

    def test_different_seed_differs(self):
        spec = generator_spec(1, 10)
        assert not np.array_equal(build_network(spec, 7).params["W1"], build_network(spec, 8).params["W1"])

    def test_glorot_bounds_and_zero_bias(self):
        net = build_network(discriminator_spec(2), 0)
        for name, arr in net.params.items():
            if name.startswith("b"):
                assert np.all(arr == 0)
            else:
                limit = np.sqrt(6.0 / sum(arr.shape))
                assert np.all(np.abs(arr) <= limit)
                # a uniform draw on +-limit has standard deviation limit / sqrt(3)
                assert arr.std() == pytest.approx(limit / np.sqrt(3), rel=0.1)

    def test_shapes_follow_spec(self):
        net = build_network(generator_spec(1, 10), 0)
        assert net.params["W1"].shape == (11, 256)
        assert net.params["W4"].shape == (64, 1)
        assert len(net.params) == 8

    def test_parameter_shape_mismatch(self):
        spec = generator_spec(1, 2, widths=(3,))
        with pytest.raises(DimensionError):
            Network(spec, {"W1": np.zeros((2, 3)), "b1": np.zeros(3), "W2": np.zeros((3, 1)), "b2": np.zeros(1)})


class TestForward:
    def test_output_shape(self, rng):
        net = build_network(discriminator_spec(3, widths=(8, 8)), 1)
        assert net.forward(rng.normal(size=(5, 3))).shape == (5, 1)

    def test_discriminator_inside_unit_interval(self, rng):
        net = build_network(discriminator_spec(2), 1)
        out = net.forward(rng.normal(scale=5, size=(500, 2)))
        assert np.all(out > 0) and np.all(out < 1)

    def test_critic_unbounded(self, rng):
        net = build_network(discriminator_spec(2, critic=True, widths=(4,)), 1)
        net.params["W2"][:] = 50.0
        out = net.forward(rng.uniform(1, 2, size=(10, 2)))
        assert np.any(np.abs(out) > 1)

    def test_wrong_input_width(self, rng):
        net = build_network(discriminator_spec(2), 1)
        with pytest.raises(DimensionError):
            net.forward(rng.normal(size=(4, 3)))


class TestGenerate:
    def test_zero_weights_give_zero(self, rng):
        net = build_network(generator_spec(1, 4, widths=(6, 5)), 0)
        for v in net.params.values():
            v[:] = 0.0
        out = generate(net, rng.uniform(size=(7, 1)), rng.normal(size=(7, 4)))
        np.testing.assert_array_equal(out, np.zeros((7, 1)))

    def test_batch_consistency(self, rng):
        net = build_network(generator_spec(1, 10), 3)
        cond, z = rng.uniform(size=(3, 1)), rng.normal(size=(3, 10))
        full = generate(net, cond, z)
        for i in range(3):
            np.testing.assert_allclose(generate(net, cond[i : i + 1], z[i : i + 1]), full[i : i + 1], rtol=1e-13,
                                       atol=1e-15)

    def test_reproducible(self):
        net = build_network(generator_spec(1, 10), 3)

        def draw():
            r = np.random.default_rng(11)
            return generate(net, np.full((20, 1), 0.4), r.standard_normal((20, 10)))

        np.testing.assert_array_equal(draw(), draw())

    def test_dimension_mismatch(self, rng):
        net = build_network(generator_spec(1, 10), 3)
        with pytest.raises(DimensionError):
            generate(net, np.zeros((4, 1)), np.zeros((4, 9)))
        with pytest.raises(DimensionError):
            generate(net, np.zeros((4, 1)), np.zeros((3, 10)))

    def test_needs_generator(self):
        net = build_network(discriminator_spec(2), 3)
        with pytest.raises(ConfigurationError):
            generate(net, np.zeros((1, 1)), np.zeros((1, 1)))


class TestClip:
    def test_inside_unchanged(self, rng):
        net = build_network(discriminator_spec(2, widths=(4,)), 0)
        for v in net.params.values():
            v[:] = rng.uniform(-0.01, 0.01, size=v.shape)
        before = net.copy()
        clip_weights(net, 0.01)
        for k in net.params:
            np.testing.assert_array_equal(net.params[k], before.params[k])

    def test_clamps(self):
        net = build_network(discriminator_spec(2, widths=(4,)), 0)
        net.params["W1"][0, 0] = 0.5
        net.params["b1"][1] = -3.0
        clip_weights(net, 0.01)
        assert net.params["W1"][0, 0] == 0.01
        assert net.params["b1"][1] == -0.01

    def test_bound_holds(self):
        net = build_network(discriminator_spec(2), 4)
        clip_weights(net, 0.01)
        assert max(np.abs(v).max() for v in net.params.values()) <= 0.01


class TestCheckpoint:
    def test_round_trip_bitwise(self, tmp_path):
        net = build_network(generator_spec(1, 10), 5)
        meta = {"update": 10000, "seed": 5, "config_digest": "abc123"}
        path = save_checkpoint(net, tmp_path / "g.ckpt", meta)
        ck = load_checkpoint(path)
        assert ck.network.spec == net.spec
        assert ck.update == 10000
        assert ck.meta["config_digest"] == "abc123" and ck.meta["seed"] == 5
        for k, v in net.params.items():
            assert ck.network.params[k].tobytes() == v.tobytes()
        # saving the loaded copy reproduces the file byte for byte
        again = save_checkpoint(ck.network, tmp_path / "g2.ckpt", meta)
        assert again.read_bytes() == path.read_bytes()

    def test_layout(self, tmp_path):
        net = build_network(generator_spec(1, 10), 5)
        raw = save_checkpoint(net, tmp_path / "g.ckpt", {"update": 1}).read_bytes()
        assert raw[:8] == b"ADVREG01" == MAGIC
        (n,) = struct.unpack("<I", raw[8:12])
        meta = json.loads(raw[12 : 12 + n])
        assert meta["n_params"] == 8
        assert meta["init"] == "glorot_uniform"
        pos = 12 + n
        (name_len,) = struct.unpack("<I", raw[pos : pos + 4])
        assert raw[pos + 4 : pos + 4 + name_len] == b"W1"
        pos += 4 + name_len
        rank, d0, d1 = struct.unpack("<III", raw[pos : pos + 12])
        assert (rank, d0, d1) == (2, 11, 256)
        first = np.frombuffer(raw[pos + 12 : pos + 12 + 8 * 11 * 256], dtype="<f8").reshape(11, 256)
        np.testing.assert_array_equal(first, net.params["W1"])

    def test_bad_magic(self, tmp_path):
        path = save_checkpoint(build_network(generator_spec(1, 2, widths=(3,)), 0), tmp_path / "g.ckpt")
        raw = bytearray(path.read_bytes())
        raw[0:8] = b"NOTACKPT"
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            load_checkpoint(path)

    def test_bad_version(self, tmp_path):
        net = build_network(generator_spec(1, 2, widths=(3,)), 0)
        path = save_checkpoint(net, tmp_path / "g.ckpt")
        raw = path.read_bytes()
        (n,) = struct.unpack("<I", raw[8:12])
        meta = json.loads(raw[12 : 12 + n])
        meta["format_version"] = 99
        text = json.dumps(meta).encode()
        path.write_bytes(raw[:8] + struct.pack("<I", len(text)) + text + raw[12 + n :])
        with pytest.raises(FormatError):
            load_checkpoint(path)

    def test_truncated(self, tmp_path):
        path = save_checkpoint(build_network(generator_spec(1, 2, widths=(3,)), 0), tmp_path / "g.ckpt")
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(CorruptionError):
            load_checkpoint(path)

    def test_trailing_bytes(self, tmp_path):
        path = save_checkpoint(build_network(generator_spec(1, 2, widths=(3,)), 0), tmp_path / "g.ckpt")
        path.write_bytes(path.read_bytes() + b"\0")
        with pytest.raises(CorruptionError):
            load_checkpoint(path)
