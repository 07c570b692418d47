import numpy as np
import pytest

from stochsg import kernels as ker
from stochsg import series as ser
from stochsg import spde_mc as mc


@pytest.fixture(scope="session")
def params():
    return ker.ModelParams(m=0.5, a=1.0, hbar=0.1, lam=0.5, mu=1.0,
                           t_switch=-0.6, chi_width=1.0)


@pytest.fixture(scope="session")
def smearings():
    return {
        "f1": ker.SmearingFunction.bump(0.35, -0.25, 0.18, name="f1"),
        "f2": ker.SmearingFunction.bump(0.40, 0.20, 0.18, name="f2"),
        "g": ker.SmearingFunction.bump(0.00, 0.00, 0.50, name="g"),
    }


@pytest.fixture(scope="session")
def qtable(params):
    return ker.build_q_table(params, n_t=24, n_x=48, budget=256)


@pytest.fixture(scope="session")
def ctx(params, qtable, smearings):
    return ser.EvalContext(params, qtable, smearings)


@pytest.fixture(scope="session")
def params_alpha_half(params):
    # a^2 hbar / (4 pi) = 1/2
    return params.with_(hbar=2.0 * np.pi)


@pytest.fixture(scope="session")
def qtable_alpha_half(params_alpha_half):
    return ker.build_q_table(params_alpha_half, n_t=24, n_x=48, budget=256)


@pytest.fixture(scope="session")
def ctx_alpha_half(params_alpha_half, qtable_alpha_half, smearings):
    return ser.EvalContext(params_alpha_half, qtable_alpha_half, smearings)


@pytest.fixture(scope="session")
def mc_grid(params, smearings):
    return mc.grid_for(params, list(smearings.values()), dt=0.02, pad=0.3)


@pytest.fixture(scope="session")
def mc_estimates(params, smearings, mc_grid):
    """One shared 2x10^4-realization run covering acceptance observables."""
    obs = [
        mc.ObservableSpec("corr0", "corr", ("f1", "f2"), 0),
        mc.ObservableSpec("corr1", "corr", ("f1", "f2"), 1),
        mc.ObservableSpec("corr2", "corr", ("f1", "f2"), 2),
        mc.ObservableSpec("e0", "expect", ("f1",), 0),
        mc.ObservableSpec("e1", "expect", ("f1",), 1),
        mc.ObservableSpec("e2", "expect", ("f1",), 2),
    ]
    return mc.estimate_correlator(obs, mc_grid, params, smearings,
                                  n_samples=20000, seed=424242)
