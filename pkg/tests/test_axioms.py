import pytest

from suites import AXIOMS, axiom_suite


@pytest.mark.parametrize("name", AXIOMS)
def test_axiom_sound(name):
    (res,) = axiom_suite(25, seed=7, names=[name], normalizer_depth=2).values()
    assert res.ok, res.failures[:2]
    assert res.total == 25
