import math

import pytest
from hypothesis import settings

from chiralqed.core_model import SystemParams

settings.register_profile("default", deadline=None, max_examples=25)
settings.load_profile("default")

SQRT45 = math.sqrt(45)


def fig4_params(**changes) -> SystemParams:
    base = SystemParams(g_q=0.5, g_a=0.5, g_b=0.5 / SQRT45, gamma_q=0.01, gamma_a=0.01, omega=1e-3, n_max=2)
    return base.replace(**changes)


def fig3_params(g_a=0.25, g_q=0.05, gamma=1e-3, **changes) -> SystemParams:
    base = SystemParams(g_q=g_q, g_a=g_a, g_b=g_a / SQRT45, gamma_q=gamma, gamma_a=gamma, n_max=1)
    return base.replace(**changes)


def bad_cavity(params: SystemParams, s: float) -> SystemParams:
    """Scale couplings by s, and rates and drive by s^2: cooperativities are unchanged."""
    return params.replace(
        g_q=params.g_q * s, g_a=params.g_a * s, g_b=params.g_b * s,
        gamma_q=params.gamma_q * s * s, gamma_a=params.gamma_a * s * s,
        delta_q=params.delta_q * s * s, delta_a=params.delta_a * s * s, delta_b=params.delta_b * s * s,
        omega=params.omega * s * s,
    )


@pytest.fixture
def fig4():
    return fig4_params()
