import numpy as np
import pytest

from harmonic_mpc.model import make_ball_and_plate, make_double_integrator
from harmonic_mpc.hmpc import HmpcConfig


@pytest.fixture(scope="session")
def double_integrator():
    return make_double_integrator()


@pytest.fixture(scope="session")
def ball_and_plate():
    return make_ball_and_plate()


@pytest.fixture(scope="session")
def case_study_weights():
    Q = np.diag([10.0, 5.0, 5.0, 5.0, 10.0, 5.0, 5.0, 5.0])
    R = 0.5 * np.eye(2)
    T_e = 50.0 * Q
    S_e = 10.0 * np.eye(2)
    return Q, R, T_e, S_e


@pytest.fixture(scope="session")
def case_study_cfg(case_study_weights):
    Q, R, T_e, S_e = case_study_weights
    return HmpcConfig(N=8, Q=Q, R=R, T_e=T_e, S_e=S_e,
                      T_h=0.1 * T_e, S_h=0.5 * S_e, w=np.pi / 16, sigma=1e-3)


@pytest.fixture(scope="session")
def di_cfg():
    return HmpcConfig(N=4, Q=np.eye(2), R=np.eye(1), T_e=50 * np.eye(2),
                      S_e=10 * np.eye(1), T_h=5 * np.eye(2), S_h=np.eye(1),
                      w=np.pi / 16, sigma=1e-3)
