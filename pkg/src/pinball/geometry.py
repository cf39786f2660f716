"""Pinball domain geometry constants."""

import numpy as np

# channel [0, 26] x [0, 12]; three unit-diameter cylinders in an
# upstream-pointing equilateral triangle of radius 1.5, centroid (6, 6)
XMIN, XMAX = 0.0, 26.0
YMIN, YMAX = 0.0, 12.0

CYLINDER_RADIUS = 0.5

#: centers ordered (front, bottom, top)
CYLINDER_CENTERS = np.array([
    [6.0 - 1.5 * np.cos(np.pi / 6.0), 6.0],
    [6.0, 6.0 - 0.75],
    [6.0, 6.0 + 0.75],
])

CYLINDER_TAGS = ("cyl1", "cyl2", "cyl3")

#: sensor rectangle split into a 4 x 3 grid of averaging boxes
SENSOR_X_SPLITS = np.linspace(10.0, 13.0, 5)
SENSOR_Y_SPLITS = np.linspace(5.0, 7.0, 4)


def sensor_boxes():
    """(12, 4) array of boxes (xlo, xhi, ylo, yhi), x-major then y."""
    boxes = []
    for iy in range(len(SENSOR_Y_SPLITS) - 1):
        for ix in range(len(SENSOR_X_SPLITS) - 1):
            boxes.append((SENSOR_X_SPLITS[ix], SENSOR_X_SPLITS[ix + 1],
                          SENSOR_Y_SPLITS[iy], SENSOR_Y_SPLITS[iy + 1]))
    return np.array(boxes)
