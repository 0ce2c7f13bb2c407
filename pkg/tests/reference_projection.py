"""Scalar fisheye projection written directly from the model equations.

Kept apart from the package on purpose: plain ``math`` on one point at a
time, no shared helpers, so it can serve as an independent check.
"""

import math


def project_point(x, y, z, fx, fy, cx, cy, alpha, k1, k2, k3, k4):
    a = x / z
    b = y / z
    r = math.sqrt(a * a + b * b)
    theta = math.atan(r)
    theta_d = theta * (1 + k1 * theta**2 + k2 * theta**4 + k3 * theta**6 + k4 * theta**8)
    if r < 1e-12:
        ratio = 1.0
    else:
        ratio = theta_d / r
    xp = ratio * a
    yp = ratio * b
    u = fx * (xp + alpha * yp) + cx
    v = fy * yp + cy
    return u, v
