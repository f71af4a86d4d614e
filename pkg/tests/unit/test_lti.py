"""
Unit tests for transfer-function and state-space algebra.

Analytic first- and second-order responses are the oracles.
"""

import math

import numpy as np
import pytest

from vsc.errors import (
    IllPosedInterconnectionError,
    ImproperTransferFunctionError,
    OnAxisPoleError,
    UnresolvedSignalError,
    UnstableSystemError,
)
from vsc.services.lti import (
    FrequencyGrid,
    RationalTF,
    StateSpaceModel,
    band_hinf,
    band_peak,
    connect,
    freqresp,
    is_stable,
    minimal_realization,
    summing_junction,
    tf_eval,
    tf_to_ss,
)

LOWPASS = RationalTF([1.0], [1.0, 1.0])


class TestTransferFunctions:
    """Test suite for RationalTF evaluation"""

    def test_first_order_at_unit_frequency(self):
        """Test that 1/(s+1) at w=1 is (1 - j)/2"""
        assert tf_eval(LOWPASS, 1.0) == pytest.approx(0.5 - 0.5j, abs=1e-15)

    def test_highpass_at_unit_frequency(self):
        """Test that s/(s+1) at w=1 is (1 + j)/2"""
        assert tf_eval(RationalTF([1.0, 0.0], [1.0, 1.0]), 1.0) == pytest.approx(0.5 + 0.5j, abs=1e-15)

    def test_denominator_is_normalized(self):
        """Test that the denominator becomes monic without changing the response"""
        tf = RationalTF([2.0], [2.0, 2.0])
        assert tf.den.tolist() == [1.0, 1.0]
        assert tf_eval(tf, 3.0) == pytest.approx(tf_eval(LOWPASS, 3.0))

    def test_negative_frequency_rejected(self):
        """Test that negative or non-finite frequencies raise ValueError"""
        with pytest.raises(ValueError):
            tf_eval(LOWPASS, -1.0)
        with pytest.raises(ValueError):
            tf_eval(LOWPASS, math.inf)

    def test_on_axis_pole(self):
        """Test that evaluating 1/s at w=0 raises OnAxisPoleError"""
        with pytest.raises(OnAxisPoleError) as exc:
            tf_eval(RationalTF([1.0], [1.0, 0.0]), 0.0)
        assert exc.value.omega == 0.0

    def test_improper_rejected(self):
        """Test that numerator degree above denominator degree is rejected"""
        with pytest.raises(ImproperTransferFunctionError):
            RationalTF([1.0, 0.0, 0.0], [1.0, 1.0])

    def test_algebra(self):
        """Test that sums and products match pointwise responses"""
        other = RationalTF([2.0, 1.0], [1.0, 3.0, 2.0])
        w = np.array([0.1, 1.0, 7.0])
        np.testing.assert_allclose(freqresp(LOWPASS + other, w), freqresp(LOWPASS, w) + freqresp(other, w), rtol=1e-12)
        np.testing.assert_allclose(freqresp(LOWPASS * other, w), freqresp(LOWPASS, w) * freqresp(other, w), rtol=1e-12)
        np.testing.assert_allclose(freqresp(-LOWPASS, w), -freqresp(LOWPASS, w), rtol=1e-15)


class TestStateSpace:
    """Test suite for realizations and interconnections"""

    @pytest.mark.parametrize(
        "tf",
        [
            LOWPASS,
            RationalTF([1.0, 0.0], [1.0, 1.0]),
            RationalTF([3.0, 1.0, 2.0], [1.0, 0.4, 4.0]),
            RationalTF([1.0], [0.01, 1.0, 0.0]),
        ],
    )
    def test_realization_matches_transfer_function(self, tf):
        """Test that tf_to_ss agrees with direct evaluation to 1e-9"""
        w = np.logspace(-2, 3, 200)
        ss = tf_to_ss(tf)
        np.testing.assert_allclose(ss.frequency_response(w)[:, 0, 0], freqresp(tf, w), rtol=1e-9, atol=1e-12)

    def test_static_realization(self):
        """Test that a static gain has no states"""
        ss = tf_to_ss(RationalTF.static(4.0))
        assert ss.n_states == 0
        assert ss.D[0, 0] == 4.0

    def test_unit_feedback_around_integrator(self):
        """Test that closing -1 feedback around 1/s gives 1/(s+1)"""
        integrator = tf_to_ss(RationalTF([1.0], [1.0, 0.0]), "err", "y")
        junction = summing_junction({"r": 1.0, "y": -1.0}, "err")
        closed = connect([integrator, junction], external_inputs=["r"], external_outputs=["y"])
        w = np.logspace(-2, 2, 50)
        np.testing.assert_allclose(closed.frequency_response(w)[:, 0, 0], freqresp(LOWPASS, w), rtol=1e-12)
        assert is_stable(closed)[0]

    def test_block_order_does_not_matter(self):
        """Test that listing the blocks in another order gives the same closed loop"""
        integrator = tf_to_ss(RationalTF([1.0], [1.0, 0.0]), "err", "y")
        junction = summing_junction({"r": 1.0, "y": -1.0}, "err")
        first = connect([integrator, junction], external_inputs=["r"], external_outputs=["y"])
        second = connect([junction, integrator], external_inputs=["r"], external_outputs=["y"])
        w = np.logspace(-2, 2, 20)
        np.testing.assert_allclose(first.frequency_response(w), second.frequency_response(w), rtol=1e-12)

    def test_wiring_map_with_gains(self):
        """Test that wiring sources are summed with their signs and gains"""
        gain = tf_to_ss(RationalTF.static(1.0), "x", "y")
        closed = connect([gain], wiring={"x": ["a", "-b", ("c", 2.0)]}, external_inputs=["a", "b", "c"], external_outputs=["y"])
        assert closed.D.tolist() == [[1.0, -1.0, 2.0]]

    def test_unresolved_signal(self):
        """Test that an unknown source raises UnresolvedSignalError"""
        block = tf_to_ss(LOWPASS, "missing", "y")
        with pytest.raises(UnresolvedSignalError):
            connect([block], external_inputs=["r"], external_outputs=["y"])

    def test_ill_posed_loop(self):
        """Test that a unit static self-loop is rejected"""
        block = tf_to_ss(RationalTF.static(1.0), "a", "a")
        with pytest.raises(IllPosedInterconnectionError):
            connect([block], external_outputs=["a"])

    def test_channel_and_to_tf(self):
        """Test that a channel restriction converts back to the original transfer function"""
        tf = RationalTF([2.0, 1.0], [1.0, 3.0, 2.0])
        ss = tf_to_ss(tf, "u", "y")
        back = ss.channel("u", "y").to_tf()
        w = np.array([0.3, 3.0])
        np.testing.assert_allclose(freqresp(back, w), freqresp(tf, w), rtol=1e-10)


class TestStability:
    """Test suite for the strict stability test"""

    def test_stable(self):
        """Test that A = -1 is stable with abscissa -1"""
        stable, abscissa = is_stable(tf_to_ss(LOWPASS))
        assert stable
        assert abscissa == pytest.approx(-1.0)

    def test_marginal_is_unstable(self):
        """Test that an integrator is not strictly stable"""
        stable, abscissa = is_stable(tf_to_ss(RationalTF([1.0], [1.0, 0.0])))
        assert not stable
        assert abscissa == pytest.approx(0.0, abs=1e-12)

    def test_static_is_stable(self):
        """Test that a system without states reports (True, -inf)"""
        assert is_stable(tf_to_ss(RationalTF.static(2.0))) == (True, -math.inf)


class TestBandNorms:
    """Test suite for band-restricted H-infinity norms"""

    def test_lowpass_from_dc(self):
        """Test that |1/(s+1)| peaks at 1 on [0, 10]"""
        assert band_hinf(LOWPASS, FrequencyGrid.build(0.0, 10.0)) == pytest.approx(1.0, rel=1e-4)

    def test_lowpass_band_start(self):
        """Test that the peak on [2, 10] is at the lower band edge"""
        value, omega = band_peak(LOWPASS, FrequencyGrid.build(2.0, 10.0))
        assert value == pytest.approx(1.0 / math.sqrt(5.0), rel=1e-4)
        assert omega == pytest.approx(2.0)

    def test_highpass_band_end(self):
        """Test that |s/(s+1)| peaks at the upper band edge"""
        value = band_hinf(RationalTF([1.0, 0.0], [1.0, 1.0]), FrequencyGrid.build(0.0, 10.0))
        assert value == pytest.approx(10.0 / math.sqrt(101.0), rel=1e-4)

    def test_resonant_peak(self):
        """Test that the second-order resonance is refined between grid points"""
        zeta = 0.1
        tf = RationalTF([1.0], [1.0, 2 * zeta, 1.0])
        expected = 1.0 / (2 * zeta * math.sqrt(1 - zeta ** 2))
        assert band_hinf(tf, FrequencyGrid.build(0.1, 10.0)) == pytest.approx(expected, rel=1e-4)

    def test_scaling(self):
        """Test that the norm scales linearly with a gain"""
        grid = FrequencyGrid.build(0.0, 10.0)
        assert band_hinf(LOWPASS * 3.0, grid) == pytest.approx(3.0 * band_hinf(LOWPASS, grid), rel=1e-12)

    def test_unstable_rejected(self):
        """Test that an unstable system raises UnstableSystemError"""
        with pytest.raises(UnstableSystemError):
            band_hinf(RationalTF([1.0], [1.0, -1.0]), FrequencyGrid.build(0.0, 10.0))

    def test_wider_band_never_lowers_the_norm(self):
        """Test that the norm over a band is at least the norm over any sub-band"""
        tf = RationalTF([1.0], [1.0, 0.2, 1.0])
        whole = band_hinf(tf, FrequencyGrid.build(0.0, 10.0))
        upper = band_hinf(tf, FrequencyGrid.build(2.0, 10.0))
        lower = band_hinf(tf, FrequencyGrid.build(0.0, 0.5))
        assert whole >= upper - 1e-12
        assert whole >= lower - 1e-12
        assert upper < lower < whole

    def test_grid_contains_band_edges(self):
        """Test that grids include both band edges and stay inside the band"""
        grid = FrequencyGrid.build(0.0, 37.7, 200)
        assert grid.points[0] == 0.0
        assert grid.points[-1] == pytest.approx(37.7)
        assert np.all(np.diff(grid.points) > 0)


class TestMinimalRealization:
    """Test suite for removing hidden modes of a channel"""

    def test_uncontrollable_integrator_removed(self):
        """Test that an integrator the input cannot reach is dropped"""
        sys = StateSpaceModel(
            A=np.diag([0.0, -1.0]),
            B=np.array([[0.0], [1.0]]),
            C=np.array([[1.0, 1.0]]),
            D=np.zeros((1, 1)),
        )
        reduced = minimal_realization(sys)
        assert reduced.n_states == 1
        assert is_stable(reduced)[0]
        w = np.array([0.5, 5.0])
        np.testing.assert_allclose(reduced.frequency_response(w)[:, 0, 0], freqresp(LOWPASS, w), rtol=1e-10)

    def test_unobservable_mode_removed(self):
        """Test that a mode the output cannot see is dropped"""
        sys = StateSpaceModel(
            A=np.diag([1.0, -2.0]),
            B=np.array([[1.0], [1.0]]),
            C=np.array([[0.0, 1.0]]),
            D=np.zeros((1, 1)),
        )
        reduced = minimal_realization(sys)
        assert reduced.n_states == 1
        assert reduced.A[0, 0] == pytest.approx(-2.0)

    def test_minimal_system_kept(self):
        """Test that a minimal system keeps every state"""
        ss = tf_to_ss(RationalTF([1.0], [1.0, 0.4, 4.0]))
        assert minimal_realization(ss).n_states == 2

    def test_static_system_passes_through(self):
        """Test that a system without states comes back unchanged"""
        sys = StateSpaceModel(A=np.zeros((0, 0)), B=np.zeros((0, 1)), C=np.zeros((1, 0)), D=[[3.0]])
        reduced = minimal_realization(sys)
        assert reduced.n_states == 0
        assert reduced.D[0, 0] == 3.0

    def test_unreachable_channel_reduces_to_zero(self):
        """Test that a channel the input cannot reach has no states, is stable and has zero norm"""
        sys = StateSpaceModel(
            A=np.diag([0.0, -1.0]),
            B=np.zeros((2, 1)),
            C=np.array([[1.0, 1.0]]),
            D=np.zeros((1, 1)),
        )
        reduced = minimal_realization(sys)
        assert reduced.n_states == 0
        assert is_stable(reduced) == (True, -math.inf)
        assert band_hinf(reduced, FrequencyGrid.build(0.0, 10.0)) == 0.0
