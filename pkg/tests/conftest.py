"""Shared expensive fixtures: desk-scale mesh, steady states, and the
time-stepper convergence study, computed once per session."""

import numpy as np
import pytest

from pinball.mesh import packaged_mesh
from pinball.meshgen import rectangle_mesh
from pinball.space import build_space
from pinball.steady import linearize, solve_steady


@pytest.fixture(scope="session")
def desk_space():
    return build_space(packaged_mesh("desk"))


@pytest.fixture(scope="session")
def coarse_space():
    return build_space(packaged_mesh("coarse"))


@pytest.fixture(scope="session")
def coarse_steady30(coarse_space):
    return solve_steady(coarse_space, 30.0)


@pytest.fixture(scope="session")
def coarse_model30(coarse_space, coarse_steady30):
    return linearize(coarse_space, coarse_steady30)


@pytest.fixture(scope="session")
def steady_re30(desk_space):
    return solve_steady(desk_space, 30.0)


@pytest.fixture(scope="session")
def steady_re50(desk_space):
    return solve_steady(desk_space, 50.0)


@pytest.fixture(scope="session")
def model_re30(desk_space, steady_re30):
    return linearize(desk_space, steady_re30)


@pytest.fixture(scope="session")
def model_re50(desk_space, steady_re50):
    return linearize(desk_space, steady_re50)


TG_DTS = (4e-3, 2e-3, 1e-3)


@pytest.fixture(scope="session")
def taylor_green_errors():
    """Velocity L2 errors against the analytic vortex at t = 0.1 for the
    dt ladder TG_DTS, on a mesh fine enough that time error dominates."""
    from pinball.assemble import velocity_mass
    from pinball.ipcs import IpcsSimulator

    nu = 0.5
    T = 0.1
    space = build_space(rectangle_mesh(96, 96))
    M = velocity_mass(space)

    def exact_v(t):
        decay = np.exp(-2 * np.pi**2 * nu * t)
        return lambda x, y: (
            -np.cos(np.pi * x) * np.sin(np.pi * y) * decay,
            np.sin(np.pi * x) * np.cos(np.pi * y) * decay,
        )

    def exact_p(x, y):
        return -0.25 * (np.cos(2 * np.pi * x) + np.cos(2 * np.pi * y))

    errors = []
    for dt in TG_DTS:
        sim = IpcsSimulator(space, nu, dt,
                            dirichlet_tags=("inlet", "wall_top",
                                            "wall_bottom", "outlet"))
        v = space.interpolate(exact_v(0.0))
        p = space.interpolate_pressure(exact_p)
        p -= p[0]
        for k in range(1, round(T / dt) + 1):
            bc = space.interpolate(exact_v(k * dt))
            v, p = sim.step(v, p, bc)
        e = v - space.interpolate(exact_v(T))
        errors.append(float(np.sqrt(e @ M @ e)))
    return np.array(errors)
