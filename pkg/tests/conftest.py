"""Shared model builders for the test suite (frequencies in rad/s)."""

import numpy as np
import pytest

from sasc.model import CouplingParams, ModeParams, SystemModel, Topology

OMEGA_LOW = 2.0 * np.pi * 10e6
OMEGA_HIGH = 2.0 * np.pi * 10e9
OMEGA_OPTICAL = 1.772e15
TEMPERATURE = 0.01


def make_du(kappa_a=1.0, delta_a=0.0, kappa_b=1e-4, magnitude=0.1, phase=0.0,
            temperature=TEMPERATURE):
    return SystemModel(
        topology=Topology.DU,
        modes=(
            ModeParams("a", OMEGA_HIGH, kappa_a, delta_a),
            ModeParams("b", OMEGA_LOW, kappa_b, 1.0),
        ),
        couplings=(CouplingParams(magnitude, phase),),
        temperature=temperature,
    )


def make_three(kappa_m=1.0, kappa_c=1.0, delta_m=0.0, delta_c=0.0,
               magnitude_m=0.1, magnitude_c=0.1, phase_m=0.0, phase_c=0.0,
               kappa_b=1e-4, temperature=TEMPERATURE):
    return SystemModel(
        topology=Topology.THREE_MODE,
        modes=(
            ModeParams("m", OMEGA_HIGH, kappa_m, delta_m),
            ModeParams("b", OMEGA_LOW, kappa_b, 1.0),
            ModeParams("c", OMEGA_OPTICAL, kappa_c, delta_c),
        ),
        couplings=(
            CouplingParams(magnitude_m, phase_m),
            CouplingParams(magnitude_c, phase_c),
        ),
        temperature=temperature,
    )


def make_comparison_pair():
    """The tunable scheme and its fixed baseline used by the f-factor tests."""
    cs = make_three(kappa_m=1.0, kappa_c=0.1, delta_m=0.0, delta_c=0.0,
                    magnitude_m=0.2, magnitude_c=0.1,
                    phase_m=np.pi / 3.0, phase_c=2.0 * np.pi / 3.0)
    ics = make_three(kappa_m=0.1, kappa_c=0.1, delta_m=1.0, delta_c=1.0,
                     magnitude_m=0.2, magnitude_c=0.1, phase_m=0.0, phase_c=0.0)
    return cs, ics


@pytest.fixture
def du_model():
    return make_du()


@pytest.fixture
def three_model():
    return make_three()
