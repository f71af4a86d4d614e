"""Pytest configuration and shared fixtures"""

import numpy as np
import pytest

from vsc.models.schemas import (
    SCHEMA_VERSION,
    ConstraintSpec,
    ControllerTemplate,
    ErrorWeightSpec,
    GainSchedule,
    HumanMotion,
    NoiseSpec,
    PidSettings,
    RunConfig,
    ScenarioSettings,
    SeaPlantParams,
    SimScenario,
    StiffnessSegment,
    SynthesisSettings,
    VerifySettings,
)
from vsc.services.lti import RationalTF
from vsc.services.plant import AugmentedPlantBuilder
from vsc.services.synthesis import StructuredController

# Static error feedback that meets the default bounds for 0.1 K_s <= Zd <= K_s
WITNESS_K2 = 650.0


@pytest.fixture
def plant_params():
    """Default stand-in SEA (K_s = 1, T_m = 0.01, u_max = 44)"""
    return SeaPlantParams()


@pytest.fixture
def spec():
    """Default constraint bounds"""
    return ConstraintSpec()


@pytest.fixture
def builder(plant_params, spec):
    """Zd -> augmented plant factory on the default plant and weight"""
    return AugmentedPlantBuilder(plant_params, ErrorWeightSpec(), spec.omega_e)


@pytest.fixture
def zero_controller():
    """K = 0 on both inputs"""
    return StructuredController([RationalTF.static(0.0), RationalTF.static(0.0)])


@pytest.fixture
def witness_controller():
    """u = 650 e"""
    return StructuredController([RationalTF.static(0.0), RationalTF.static(WITNESS_K2)])


@pytest.fixture
def static_template():
    """Two static gains: K_b10 on tau_h_meas, K_b20 on e"""
    return ControllerTemplate(n_inputs=2, den_order=0, num_order=0)


@pytest.fixture
def make_schedule():
    """Build a GainSchedule directly from coefficient rows (one row per gain, increasing powers)"""

    def factory(coefficients, zd_min=0.1, zd_max=1.0, template=None):
        template = template or ControllerTemplate(n_inputs=2, den_order=0, num_order=0)
        rows = [list(map(float, row)) for row in coefficients]
        return GainSchedule(
            schema_version=SCHEMA_VERSION,
            template=template,
            order=len(rows[0]) - 1,
            zd_min=zd_min,
            zd_max=zd_max,
            normalization={"variable": "zd / zd_max", "scale": zd_max},
            gain_names=template.gain_names(),
            coefficients=rows,
            fit_residuals=[0.0] * len(rows),
            design_points=[],
            seed=0,
            constraints=ConstraintSpec(),
            plant=SeaPlantParams(),
            weight=ErrorWeightSpec(),
        )

    return factory


@pytest.fixture
def quiet_scenario():
    """Constant stiffness, 1 Hz sine, no disturbance or noise"""

    def factory(zd=0.5, duration=5.0, amplitude=0.5, **kwargs):
        return SimScenario(
            duration=duration,
            dt=1e-3,
            segments=[StiffnessSegment(start=0.0, zd=zd)],
            motion=HumanMotion(kind="sine", frequency=1.0, amplitude=amplitude),
            disturbance=NoiseSpec(rms=0.0, bandwidth=20 * np.pi),
            noise=NoiseSpec(rms=0.0, bandwidth=40 * np.pi),
            **kwargs,
        )

    return factory


def quick_run_config() -> RunConfig:
    """Small-budget run: static template, three design points, interpolating fit, short scenario"""
    return RunConfig(
        seed=3,
        template=ControllerTemplate(n_inputs=2, den_order=0, num_order=0),
        synthesis=SynthesisSettings(
            design_fractions=[0.3, 0.6, 0.9],
            order=2,
            n_starts=4,
            max_evals=200,
            refine=False,
        ),
        verify=VerifySettings(off_design_points=3, max_violations=3),
        scenario=ScenarioSettings(duration=1.0, stiffness_fractions=[0.5, 0.8]),
        pid=PidSettings(n_starts=2, max_evals=100),
    )


@pytest.fixture
def quick_config():
    return quick_run_config()
