import numpy as np
import pytest

from refractor.norms import MediumPair, Norm, dual_gradient, norm_gradient


def pytest_addoption(parser):
    parser.addoption("--regen-golden", action="store_true", default=False,
                     help="rewrite the golden solution files")


@pytest.fixture
def regen_golden(request):
    return request.config.getoption("--regen-golden")


@pytest.fixture
def iso_case1():
    """Isotropic Case I pair (kappa = 2/3)."""
    return MediumPair.isotropic(1.5, 1.0)


@pytest.fixture
def iso_case2():
    """Isotropic Case II pair (kappa = 3/2)."""
    return MediumPair.isotropic(1.0, 1.5)


@pytest.fixture
def aniso_case1():
    """Anisotropic ellipsoidal Case I pair."""
    A1 = np.diag([1.7, 1.55, 1.6])
    A2 = np.diag([1.0, 0.95, 1.05])
    return MediumPair(Norm.ellipsoidal(A1), Norm.ellipsoidal(A2))


def random_ellipsoidal_pair(rng, dim=3, scale1=1.6, scale2=0.9, jitter=0.12):
    """Random Case I ellipsoidal pair (retry until the regime holds)."""
    from refractor.errors import RegimeViolation, ValidationError

    while True:
        A1 = scale1 * np.eye(dim) + jitter * rng.standard_normal((dim, dim))
        A2 = scale2 * np.eye(dim) + jitter * rng.standard_normal((dim, dim))
        try:
            return MediumPair(Norm.ellipsoidal(A1), Norm.ellipsoidal(A2))
        except (RegimeViolation, ValidationError):
            continue


def admissible_targets(pair, src, count, spread, rng, margin=1e-4):
    """Target directions on Sigma2 around the best-aligned direction of the
    cap center, shrunk until the Case I admissibility margin holds."""
    p1 = norm_gradient(pair.n1, src.nodes)
    center = p1.mean(axis=0)
    m0 = dual_gradient(pair.n2, center)  # maximizes m.center over Sigma2
    dim = src.nodes.shape[1]
    for _ in range(40):
        dirs = [m0]
        for _ in range(count - 1):
            d = m0 + spread * rng.standard_normal(dim)
            dirs.append(d)
        dirs = np.asarray(dirs)
        from refractor.norms import norm_eval

        dirs = dirs / norm_eval(pair.n2, dirs)[:, None]
        if float((p1 @ dirs.T).min()) >= 1.0 + margin:
            return dirs
        spread *= 0.7
    raise AssertionError("could not build admissible targets")
