"""Unit tests for the SEA model and the augmented plant"""

import math

import numpy as np
import pytest

from vsc.models.schemas import ErrorWeightSpec, SeaPlantParams
from vsc.services.lti import RationalTF, freqresp, tf_eval
from vsc.services.plant import (
    AugmentedPlantBuilder,
    build_augmented_plant,
    build_sea_plant,
    desired_torque_model,
    error_weight,
)

W = np.array([0.5, 2.0, 10.0, 100.0])


def channel_response(plant, source, sink, omegas=W):
    return plant.sys.channel(source, sink).frequency_response(omegas)[:, 0, 0]


class TestSeaPlant:
    """Test suite for the open-loop SEA channels"""

    def test_motor_magnitude(self):
        """Test that |G1(j1)| = K_s / sqrt(1 + T_m^2) for the default plant"""
        plant = build_sea_plant(SeaPlantParams())
        assert abs(tf_eval(plant.g1, 1.0)) == pytest.approx(1.0 / math.sqrt(1.0 + 1e-4), rel=1e-12)

    def test_bare_spring_impedance(self):
        """Test that the uncontrolled impedance is the physical stiffness"""
        plant = build_sea_plant(SeaPlantParams(k_s=2.5))
        assert plant.impedance().is_static
        assert tf_eval(plant.impedance(), 3.0) == pytest.approx(2.5)

    def test_disturbance_enters_at_motor_input(self):
        """Test that G4 shares the motor dynamics"""
        assert build_sea_plant(SeaPlantParams()).disturbance_at_input

    def test_invalid_params_rejected(self):
        """Test that non-positive parameters fail validation"""
        with pytest.raises(ValueError):
            SeaPlantParams(k_s=0.0)
        with pytest.raises(ValueError):
            SeaPlantParams(t_m=-0.01)


class TestDesiredTorque:
    """Test suite for the reference model and the error weight"""

    def test_reference_is_negative_stiffness(self):
        """Test that tau_d = -Zd phi_h"""
        assert tf_eval(desired_torque_model(0.4), 5.0) == pytest.approx(-0.4)

    @pytest.mark.parametrize("zd", [-0.1, math.nan, math.inf])
    def test_invalid_stiffness(self, zd):
        """Test that negative or non-finite stiffness raises ValueError"""
        with pytest.raises(ValueError):
            desired_torque_model(zd)

    def test_weight_corner(self):
        """Test that the default weight is down 3 dB at omega_e"""
        we = error_weight(ErrorWeightSpec(), 12 * math.pi)
        assert abs(tf_eval(we, 12 * math.pi)) == pytest.approx(1.0 / math.sqrt(2.0), rel=1e-12)
        assert abs(tf_eval(we, 0.0)) == pytest.approx(1.0)

    def test_weight_explicit_corner(self):
        """Test that an explicit corner overrides omega_e"""
        we = error_weight(ErrorWeightSpec(omega=5.0, gain=2.0), 12 * math.pi)
        assert abs(tf_eval(we, 5.0)) == pytest.approx(2.0 / math.sqrt(2.0), rel=1e-12)


class TestAugmentedPlant:
    """Test suite for the generalized plant channels"""

    def test_labels(self, builder):
        """Test the exogenous/control inputs and performance/measured outputs"""
        plant = builder(0.5)
        assert plant.sys.input_labels == ("phi_h", "d", "n", "u")
        assert plant.sys.output_labels == ("e_w", "u_out", "tau_h", "e", "tau_h_meas")

    def test_motor_channels(self, builder):
        """Test that u and d both reach tau_h through G1"""
        plant = builder(0.5)
        g1 = freqresp(plant.plant.g1, W)
        np.testing.assert_allclose(channel_response(plant, "u", "tau_h"), g1, rtol=1e-9)
        np.testing.assert_allclose(channel_response(plant, "d", "tau_h"), g1, rtol=1e-9)

    def test_error_channel(self, builder):
        """Test that phi_h reaches e through K_s - Zd with the loop open"""
        plant = builder(0.3)
        np.testing.assert_allclose(channel_response(plant, "phi_h", "e"), 1.0 - 0.3, rtol=1e-9)

    def test_matched_stiffness_has_no_error(self, builder):
        """Test that Zd = K_s cancels the open-loop error"""
        plant = builder(1.0)
        assert np.max(np.abs(channel_response(plant, "phi_h", "e"))) < 1e-12

    def test_weighted_error(self, builder):
        """Test that e_w = W_e e"""
        plant = builder(0.2)
        expected = freqresp(plant.we, W) * (1.0 - 0.2)
        np.testing.assert_allclose(channel_response(plant, "phi_h", "e_w"), expected, rtol=1e-9)

    def test_measurement_and_control_passthrough(self, builder):
        """Test that n reaches only the measurement and u_out copies u"""
        plant = builder(0.5)
        np.testing.assert_allclose(channel_response(plant, "n", "tau_h_meas"), 1.0, rtol=1e-12)
        np.testing.assert_allclose(channel_response(plant, "n", "tau_h"), 0.0, atol=1e-12)
        np.testing.assert_allclose(channel_response(plant, "u", "u_out"), 1.0, rtol=1e-12)

    def test_weight_does_not_touch_torque(self, plant_params):
        """Test that the error weight changes e_w only"""
        a = AugmentedPlantBuilder(plant_params, ErrorWeightSpec(gain=1.0), 12 * math.pi)(0.5)
        b = AugmentedPlantBuilder(plant_params, ErrorWeightSpec(gain=5.0), 12 * math.pi)(0.5)
        np.testing.assert_allclose(channel_response(a, "phi_h", "tau_h"), channel_response(b, "phi_h", "tau_h"))
        np.testing.assert_allclose(5.0 * channel_response(a, "phi_h", "e_w"), channel_response(b, "phi_h", "e_w"), rtol=1e-9)

    def test_unstable_weight_rejected(self, plant_params):
        """Test that an unstable error weight is rejected"""
        with pytest.raises(ValueError):
            build_augmented_plant(build_sea_plant(plant_params), 0.5, RationalTF([1.0], [1.0, -1.0]))
