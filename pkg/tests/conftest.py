import numpy as np
import pytest

from sobmor.models import PHModel, SSOModel, StateSpaceModel
from sobmor.param import Layout, ParamVector, assemble


def random_theta(structure, n_x, n_u, rng, scale=1.0):
    layout = Layout(structure, n_x, n_u)
    return ParamVector(scale * rng.standard_normal(layout.size), layout)


def random_ph(n, m, rng, shift=0.5):
    """Random pH model with R, Q shifted to be definite (asymptotically stable)."""
    base = assemble(random_theta("ph", n, m, rng, 0.5))
    eye = np.eye(n)
    return PHModel(base.J, base.R + shift * eye, base.Q + shift * eye, base.B)


def random_sso(n, m, rng, shift=0.5):
    base = assemble(random_theta("sso", n, m, rng, 0.5))
    eye = np.eye(n)
    return SSOModel(base.M + eye, base.D + shift * eye, base.K + eye, base.B)


def random_stable_ss(n, m, p, rng, margin=0.5):
    A = rng.standard_normal((n, n))
    A -= (np.linalg.eigvals(A).real.max() + margin) * np.eye(n)
    return StateSpaceModel(A, rng.standard_normal((n, m)), rng.standard_normal((p, n)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
