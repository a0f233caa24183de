import numpy as np
import pytest

from domain.models import DncsSpec


@pytest.fixture(scope="session")
def seed():
    return 12345


@pytest.fixture
def rng(seed):
    return np.random.default_rng(seed)


def scalar_spec(a=2.0, b10=1.0, b11=0.0, p=0.1, q=1.0, r0=1.0, r1=1.0):
    """1 状態・2 制御器。b11=0 ならローカル制御器は何もできない (センサ構成)。"""
    return DncsSpec.two_controller([[a]], [[b10]], [[b11]], [[q]], [[r0, 0.0], [0.0, r1]], p)


def random_spec(rng, *, n_max=3, dim_max=3, sensor=False, p_max=0.8):
    """ランダムな DNCS。

    sensor=False: B^nn がランダム (一般に可制御) なので p_c = ∞。
    sensor=True: B^nn = 0、リモート入力は全状態を直接動かす。ρ(A^nn) ∈ [1.1, 2.5] なので p_c < 1。
    """
    N = int(rng.integers(1, n_max + 1))
    dims = [int(d) for d in rng.integers(1, dim_max + 1, size=N)]
    D = sum(dims)
    local = [int(m) for m in rng.integers(1, 3, size=N)]
    A_blocks, B_local, B_remote = [], [], []
    if sensor:
        m0 = D
        offsets = np.concatenate(([0], np.cumsum(dims)))
        for n, d in enumerate(dims):
            A = rng.standard_normal((d, d))
            rho = max(abs(np.linalg.eigvals(A)))
            A_blocks.append(A * rng.uniform(1.1, 2.5) / rho)
            B_local.append(np.zeros((d, local[n])))
            B_remote.append(np.eye(D)[offsets[n] : offsets[n + 1]])
    else:
        m0 = int(rng.integers(1, 3))
        for n, d in enumerate(dims):
            A_blocks.append(rng.standard_normal((d, d)) * 1.3 / np.sqrt(d))
            B_local.append(rng.standard_normal((d, local[n])))
            B_remote.append(rng.standard_normal((d, m0)))
    G = rng.standard_normal((D, D))
    Q = G @ G.T / D + np.eye(D)
    M = sum(local) + m0
    H = rng.standard_normal((M, M))
    R = H @ H.T / M + np.eye(M)
    return DncsSpec(
        n=N,
        state_dims=dims,
        input_dims=[m0] + local,
        A=A_blocks,
        B_local=B_local,
        B_remote=B_remote,
        Q=0.5 * (Q + Q.T),
        R=0.5 * (R + R.T),
        p=[float(p) for p in rng.uniform(0.0, p_max, size=N)],
    )


@pytest.fixture
def scalar_sensor_spec():
    return scalar_spec


@pytest.fixture
def random_spec_factory(rng):
    def _make(**kwargs):
        return random_spec(rng, **kwargs)

    return _make


@pytest.fixture
def scenario_dict():
    def _make(p=0.1, **sections):
        data = {
            "name": "scalar-sensor",
            "spec": {
                "n": 1,
                "state_dims": [1],
                "input_dims": [1, 1],
                "A": [[[2.0]]],
                "B_local": [[[0.0]]],
                "B_remote": [[[1.0]]],
                "Q": [[1.0]],
                "R": [[1.0, 0.0], [0.0, 1.0]],
                "p": [p],
            },
        }
        data.update(sections)
        return data

    return _make
