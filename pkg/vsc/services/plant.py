"""
Series elastic actuator model and the augmented impedance-matching plant.

The open-loop SEA is a velocity-controlled motor (time constant T_m) driving
the human link through a torsion spring K_s:

    tau_h = G1 u + G2 phi_h + G4 d,    tau_h_meas = tau_h + G3 n

with G1 = G4 = K_s / (s (T_m s + 1)), G2 = -K_s and G3 = 1. The augmented
plant adds the desired-torque reference tau_d = -Zd phi_h, the error
e = tau_d - tau_h and the weighted error e_w = W_e e.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from vsc.models.schemas import ErrorWeightSpec, SeaPlantParams
from vsc.services.lti import (
    RationalTF,
    StateSpaceModel,
    connect,
    summing_junction,
    tf_to_ss,
)

logger = logging.getLogger(__name__)

EXOGENOUS_INPUTS = ("phi_h", "d", "n")
CONTROL_INPUT = "u"
PERFORMANCE_OUTPUTS = ("e_w", "u_out", "tau_h", "e")
MEASURED_OUTPUTS = ("tau_h_meas", "e")


@dataclass(frozen=True, eq=False)
class OpenLoopPlant:
    """Open-loop SEA channels; d enters at the motor velocity command, n on the torque sensor"""

    params: SeaPlantParams
    g1: RationalTF  # u -> tau_h
    g2: RationalTF  # phi_h -> tau_h
    g3: RationalTF  # n -> tau_h_meas
    g4: RationalTF  # d -> tau_h

    @property
    def disturbance_at_input(self) -> bool:
        """True when d shares the motor dynamics with u (G4 == G1)"""
        return self.g4 is self.g1 or (
            np.array_equal(self.g4.num, self.g1.num) and np.array_equal(self.g4.den, self.g1.den)
        )

    def impedance(self) -> RationalTF:
        """Uncontrolled interaction impedance -tau_h/phi_h (the bare spring)"""
        return -self.g2


def build_sea_plant(params: SeaPlantParams) -> OpenLoopPlant:
    """
    Open-loop SEA transfer functions.

    Args:
        params: K_s, T_m (validated positive by the schema)

    Returns:
        OpenLoopPlant with G1 = G4 = K_s/(s(T_m s + 1)), G2 = -K_s, G3 = 1
    """
    motor = RationalTF([params.k_s], [params.t_m, 1.0, 0.0])
    return OpenLoopPlant(
        params=params,
        g1=motor,
        g2=RationalTF.static(-params.k_s),
        g3=RationalTF.static(1.0),
        g4=motor,
    )


def desired_torque_model(zd: float) -> RationalTF:
    """Static reference tau_d = -Zd phi_h"""
    if not math.isfinite(zd) or zd < 0:
        raise ValueError(f"desired stiffness must be finite and >= 0, got {zd!r}")
    return RationalTF.static(-float(zd))


def error_weight(spec: ErrorWeightSpec, omega_e: float) -> RationalTF:
    """W_e(s) = gain / (s/omega + 1); omega defaults to the error band edge"""
    omega = spec.omega or omega_e
    return RationalTF([spec.gain], [1.0 / omega, 1.0])


@dataclass(frozen=True, eq=False)
class AugmentedPlant:
    """
    Generalized plant P for one desired stiffness.

    Inputs are [phi_h, d, n, u]; outputs are [e_w, u_out, tau_h, e, tau_h_meas].
    """

    sys: StateSpaceModel
    zd: float
    we: RationalTF
    plant: OpenLoopPlant


def _check_weight(we: RationalTF) -> None:
    poles = we.poles()
    if poles.size and np.max(poles.real) >= 0:
        raise ValueError(f"error weight must be stable, poles={poles.tolist()}")


def build_augmented_plant(plant: OpenLoopPlant, zd: float, we: RationalTF) -> AugmentedPlant:
    """
    Assemble the generalized plant for the desired stiffness zd.

    Args:
        plant: Open-loop SEA
        zd: Desired stiffness (>= 0)
        we: Stable proper error weight

    Returns:
        AugmentedPlant whose sys has inputs [phi_h, d, n, u]
    """
    _check_weight(we)
    tau_d = desired_torque_model(zd)

    blocks = [
        tf_to_ss(plant.g2, "phi_h", "tau_phi"),
        tf_to_ss(tau_d, "phi_h", "tau_d"),
        summing_junction({"tau_d": 1.0, "tau_h": -1.0}, "e"),
        tf_to_ss(we, "e", "e_w"),
        tf_to_ss(plant.g3, "n", "n_meas"),
        summing_junction(["tau_h", "n_meas"], "tau_h_meas"),
        summing_junction(["u"], "u_out"),
    ]
    wiring: dict[str, list[str]] = {}
    if plant.disturbance_at_input:
        blocks.append(tf_to_ss(plant.g1, "u_act", "tau_u"))
        blocks.append(summing_junction(["tau_u", "tau_phi"], "tau_h"))
        wiring["u_act"] = ["u", "d"]
    else:
        blocks.append(tf_to_ss(plant.g1, "u", "tau_u"))
        blocks.append(tf_to_ss(plant.g4, "d", "tau_d_dist"))
        blocks.append(summing_junction(["tau_u", "tau_phi", "tau_d_dist"], "tau_h"))

    sys = connect(
        blocks,
        wiring=wiring,
        external_inputs=EXOGENOUS_INPUTS + (CONTROL_INPUT,),
        external_outputs=PERFORMANCE_OUTPUTS + ("tau_h_meas",),
    )
    logger.debug(f"Augmented plant for Zd={zd:.4g}: {sys.n_states} states")
    return AugmentedPlant(sys=sys, zd=float(zd), we=we, plant=plant)


@dataclass(frozen=True)
class AugmentedPlantBuilder:
    """Picklable Zd -> AugmentedPlant factory used by synthesis workers"""

    params: SeaPlantParams
    weight: ErrorWeightSpec
    omega_e: float

    def __call__(self, zd: float) -> AugmentedPlant:
        plant = build_sea_plant(self.params)
        return build_augmented_plant(plant, zd, error_weight(self.weight, self.omega_e))
