import numpy as np
import pytest

from nlcs.mixing import MIXING_FUNCTIONS, apply_mixing, get_mixing


@pytest.mark.parametrize("name", sorted(MIXING_FUNCTIONS))
def test_symmetric_in_arguments(name):
    rng = np.random.default_rng(0)
    a = rng.standard_normal(200)
    b = rng.standard_normal(200)
    fn = MIXING_FUNCTIONS[name]
    assert np.allclose(apply_mixing(fn, a, b), apply_mixing(fn, b, a))


@pytest.mark.parametrize("name", ["mean", "max", "min"])
def test_identity_on_diagonal(name):
    rng = np.random.default_rng(1)
    a = rng.standard_normal(100)
    assert np.allclose(MIXING_FUNCTIONS[name](a, a), a)


@pytest.mark.parametrize("name", sorted(MIXING_FUNCTIONS))
def test_positively_homogeneous(name):
    rng = np.random.default_rng(2)
    a = rng.standard_normal(100)
    b = rng.standard_normal(100)
    fn = MIXING_FUNCTIONS[name]
    for c in (0.5, 3.0):
        assert np.allclose(apply_mixing(fn, c * a, c * b), c * apply_mixing(fn, a, b))


def test_harmonic_fallback_counted():
    fn = MIXING_FUNCTIONS["harmonic"]
    stats = {}
    out = apply_mixing(fn, np.array([1.0, 0.0, 2.0]), np.array([-1.0, 0.0, 2.0]), stats)
    assert out.tolist() == [0.0, 0.0, 2.0]
    assert stats["mix_fallbacks"] == 2


def test_get_mixing_accepts_callable_and_rejects_unknown():
    fn = get_mixing(lambda a, b: a * 0)
    assert callable(fn)
    with pytest.raises(ValueError, match="unknown mixing"):
        get_mixing("cosine")
