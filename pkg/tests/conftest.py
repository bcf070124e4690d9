import numpy as np
import pytest

from twrs.model import ChannelSet
from twrs.numkit import crandn


def random_channel(rng, N=2, M=2, K=2, P=3.0, L=5.0, **kw):
    return ChannelSet(crandn(rng, M, N), crandn(rng, M, K), crandn(rng, N, M), crandn(rng, K, M),
                      P_B=L * P, P_R=P, P_k=np.full(K, P), **kw)


def scalar_channel(h1=1.0, h2=1.0, g1=1.0, g2=1.0, **kw):
    one = lambda v: np.array([[v]], dtype=complex)  # noqa: E731
    return ChannelSet(one(h1), one(h2), one(g1), one(g2), **kw)


def random_psd(rng, n, rank=None):
    rank = n if rank is None else rank
    V = crandn(rng, n, rank)
    return V @ V.conj().T


def random_hermitian(rng, n):
    A = crandn(rng, n, n)
    return 0.5 * (A + A.conj().T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def seeded_channel(r, K=2, P_db=5.0, L=5.0, seed=0, N=None, M=None):
    """Rayleigh channel of realization ``r`` with baseline-SINR targets, as the harness draws it."""
    from twrs.sim import ExperimentScenario, gen_rayleigh_channels
    scen = ExperimentScenario(N=N or K, M=M or K, K=K, L=L, snr_grid_db=[P_db])
    ch = gen_rayleigh_channels(scen, np.random.default_rng(np.random.SeedSequence([seed, r])), P_db)
    from twrs.model import baseline_sinr
    return ch, baseline_sinr(ch)


ACCEPTANCE = []


def report(number, passed, detail):
    """Record one acceptance verdict; printed in the terminal summary."""
    ACCEPTANCE.append((number, passed, detail))
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE, key=lambda a: a[0]):
        terminalreporter.write_line("criterion %2d: %s  %s" % (number, "PASS" if passed else "FAIL", detail))
