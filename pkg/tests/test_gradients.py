"""Finite-difference checks of every training loss on randomised small networks."""
import pytest

from gradcheck import REL_TOL, check
from gradient_cases import CASES


@pytest.mark.parametrize("name", sorted(CASES))
def test_loss_gradients(name):
    errors = [check(*CASES[name](seed)) for seed in range(50)]
    assert max(errors) < REL_TOL, f"{name}: worst relative error {max(errors):.3e}"
