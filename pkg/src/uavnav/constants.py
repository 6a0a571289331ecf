"""Physical constants and the navigation-frame convention.

The navigation frame is local-level with the z axis pointing down (NED).
Flipping ``Z_DOWN`` switches gravity and the height mapping together; every
module reads the convention from here.
"""

import numpy as np

Z_DOWN = True

GRAVITY_MAGNITUDE = 9.79  # m/s^2
GRAVITY = np.array([0.0, 0.0, GRAVITY_MAGNITUDE if Z_DOWN else -GRAVITY_MAGNITUDE])

# Row that maps a navigation-frame position to height above the origin.
HEIGHT_ROW = np.array([0.0, 0.0, -1.0 if Z_DOWN else 1.0])

P0_BAR = 1.01325  # standard sea-level pressure
BARO_SCALE_HEIGHT = 44300.0  # m
BARO_EXPONENT = 5.255

MAG_REFERENCE = np.array([1.0, 0.0, 0.0])  # magnetic north along nav x

DEG = np.pi / 180.0


def height_of(p_n):
    """Height above the navigation origin for a position ``p_n``."""
    return float(HEIGHT_ROW @ p_n)
