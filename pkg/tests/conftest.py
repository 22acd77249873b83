import numpy as np
import pytest

from bdprecode import numkernel


def _available_backends():
    names = ["python"]
    try:
        from bdprecode.numkernel import _core  # noqa: F401
    except ImportError:
        pass
    else:
        names.insert(0, "compiled")
    return names


BACKENDS = _available_backends()


@pytest.fixture(params=BACKENDS)
def backend(request):
    previous = numkernel.use_backend(request.param)
    yield request.param
    numkernel.use_backend(previous)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


ACCEPTANCE = {}


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
