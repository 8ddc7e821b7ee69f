"""Quadrotor geometric tracking control with L1 adaptive augmentation,
a certification engine for its tube and ultimate-bound guarantees, and a
scenario/benchmark simulator."""
from .dynamics import State, VehicleParams
from .geometric import GainSet
from .l1 import L1Params, L1State
from .sim import SimConfig, SimLog, run_closed_loop

__version__ = "0.1.0"
