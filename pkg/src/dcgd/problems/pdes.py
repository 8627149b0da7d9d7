"""Benchmark PDEs: Helmholtz 2D, viscous Burgers, Klein-Gordon, Poisson 1D."""
from __future__ import annotations

import numpy as np

from dcgd import autodiff as ad
from dcgd.problems import reference as refsol
from dcgd.problems.base import PinnProblem

PI = np.pi


# --- samplers --------------------------------------------------------------

def uniform_box(rng: np.random.Generator, n: int, lo, hi) -> np.ndarray:
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    return lo + (hi - lo) * rng.random((n, lo.size))


def face_counts(n: int, n_faces: int) -> list[int]:
    """Split ``n`` points as evenly as possible over the faces."""
    q, r = divmod(n, n_faces)
    return [q + (i < r) for i in range(n_faces)]


def box_faces(rng: np.random.Generator, n: int, lo, hi, faces) -> np.ndarray:
    """Points uniform on the given faces of a box.

    ``faces`` lists ``(axis, side)`` pairs with side 0 for ``lo`` and 1 for
    ``hi``; the fixed coordinate is set exactly, not sampled.
    """
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    parts = []
    for (axis, side), m in zip(faces, face_counts(n, len(faces))):
        pts = uniform_box(rng, m, lo, hi)
        pts[:, axis] = hi[axis] if side else lo[axis]
        parts.append(pts)
    return np.concatenate(parts, axis=0)


def grid_points(lo, hi, n: int) -> np.ndarray:
    """``n`` uniform points per axis, flattened to ``(n**d, d)`` with the last axis fastest."""
    axes = [np.linspace(a, b, n) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _col(x, i):
    return x[:, i:i + 1]


# --- Helmholtz 2D ----------------------------------------------------------

HELMHOLTZ_K, HELMHOLTZ_A1, HELMHOLTZ_A2 = 1.0, 1.0, 4.0


def helmholtz_forcing(x: np.ndarray) -> np.ndarray:
    k, a1, a2 = HELMHOLTZ_K, HELMHOLTZ_A1, HELMHOLTZ_A2
    return ((k * k - (a1 * PI) ** 2 - (a2 * PI) ** 2)
            * np.sin(a1 * PI * x[:, 0]) * np.sin(a2 * PI * x[:, 1]))[:, None]


def helmholtz_exact(x):
    return ad.sin(HELMHOLTZ_A1 * PI * _col(x, 0)) * ad.sin(HELMHOLTZ_A2 * PI * _col(x, 1))


def _helmholtz_residual(model, x):
    u = model(ad.seed_inputs(x, (0, 1)))
    _, uxx = ad.input_derivatives(u, 0)
    _, uyy = ad.input_derivatives(u, 1)
    return uxx + uyy + HELMHOLTZ_K ** 2 * u.primal - helmholtz_forcing(x)


def _dirichlet_zero(model, xb):
    return model(xb)


def helmholtz2d() -> PinnProblem:
    lo, hi = (-1.0, -1.0), (1.0, 1.0)
    faces = [(0, 0), (0, 1), (1, 0), (1, 1)]
    return PinnProblem(
        name="helmholtz2d", input_dim=2, output_dim=1,
        residual=_helmholtz_residual,
        boundary=_dirichlet_zero,
        sample_domain=lambda rng, n: uniform_box(rng, n, lo, hi),
        sample_boundary=lambda rng, n: box_faces(rng, n, lo, hi, faces),
        reference=helmholtz_exact,
        test_points=lambda: grid_points(lo, hi, 256),
        exact=helmholtz_exact,
    )


# --- viscous Burgers -------------------------------------------------------
# inputs are (t, x)

BURGERS_NU = 0.01 / PI
BURGERS_N_INITIAL, BURGERS_N_SIDE = 256, 100


def burgers_boundary_set() -> np.ndarray:
    """The fixed 456-point boundary set: 256 initial points and 100 on each wall."""
    x0 = np.linspace(-1.0, 1.0, BURGERS_N_INITIAL)
    ts = np.linspace(0.0, 1.0, BURGERS_N_SIDE)
    init = np.stack([np.zeros_like(x0), x0], axis=1)
    left = np.stack([ts, -np.ones_like(ts)], axis=1)
    right = np.stack([ts, np.ones_like(ts)], axis=1)
    return np.concatenate([init, left, right], axis=0)


def burgers_boundary_values(xb: np.ndarray) -> np.ndarray:
    """Initial data on t = 0 and zero on the walls."""
    return np.where(xb[:, 0] == 0.0, -np.sin(PI * xb[:, 1]), 0.0)[:, None]


def sample_fixed(points: np.ndarray):
    """Draw without replacement from a pre-generated point set."""
    def sampler(rng: np.random.Generator, n: int) -> np.ndarray:
        if n > len(points):
            raise ValueError(f"requested {n} points from a fixed set of {len(points)}")
        return points[rng.choice(len(points), size=n, replace=False)]
    return sampler


def _burgers_residual(model, x):
    u = model(ad.seed_inputs(x, (0, 1)))
    ut, _ = ad.input_derivatives(u, 0)
    ux, uxx = ad.input_derivatives(u, 1)
    return ut + u.primal * ux - BURGERS_NU * uxx


def _burgers_boundary(model, xb):
    return model(xb) - burgers_boundary_values(xb)


def burgers() -> PinnProblem:
    lo, hi = (0.0, -1.0), (1.0, 1.0)
    return PinnProblem(
        name="burgers", input_dim=2, output_dim=1,
        residual=_burgers_residual,
        boundary=_burgers_boundary,
        sample_domain=lambda rng, n: uniform_box(rng, n, lo, hi),
        sample_boundary=sample_fixed(burgers_boundary_set()),
        reference=lambda p: refsol.burgers_reference(p, BURGERS_NU)[:, None],
        test_points=lambda: grid_points(lo, hi, 256),
        meta={"nu": BURGERS_NU},
    )


# --- Klein-Gordon ----------------------------------------------------------
# inputs are (t, x); operator u_tt - u_xx + u^3

def klein_gordon_exact(x):
    t, s = _col(x, 0), _col(x, 1)
    return s * ad.cos(5.0 * PI * t) + (t * s) ** 3


def klein_gordon_forcing(x: np.ndarray) -> np.ndarray:
    t, s = x[:, :1], x[:, 1:]
    u = s * np.cos(5 * PI * t) + (t * s) ** 3
    u_tt = -25 * PI ** 2 * s * np.cos(5 * PI * t) + 6 * t * s ** 3
    u_xx = 6 * s * t ** 3
    return u_tt - u_xx + u ** 3


def _kg_residual(model, x):
    u = model(ad.seed_inputs(x, (0, 1)))
    _, utt = ad.input_derivatives(u, 0)
    _, uxx = ad.input_derivatives(u, 1)
    return utt - uxx + u.primal ** 3 - klein_gordon_forcing(x)


def _kg_boundary(model, xb):
    """``u - x`` and ``u_t`` at t = 0, and ``u - u*`` on the walls."""
    init = xb[:, 0] == 0.0
    parts = []
    if np.any(init):
        xi = xb[init]
        u = model(ad.seed_inputs(xi, (0,)))
        ut, _ = ad.input_derivatives(u, 0)
        parts += [u.primal - xi[:, 1:], ut]
    if np.any(~init):
        xw = xb[~init]
        parts.append(model(xw) - klein_gordon_exact(xw))
    return ad.concat0(parts)


def klein_gordon() -> PinnProblem:
    lo, hi = (0.0, 0.0), (1.0, 1.0)
    faces = [(0, 0), (1, 0), (1, 1)]
    return PinnProblem(
        name="klein_gordon", input_dim=2, output_dim=1,
        residual=_kg_residual,
        boundary=_kg_boundary,
        sample_domain=lambda rng, n: uniform_box(rng, n, lo, hi),
        sample_boundary=lambda rng, n: box_faces(rng, n, lo, hi, faces),
        reference=klein_gordon_exact,
        test_points=lambda: grid_points(lo, hi, 256),
        exact=klein_gordon_exact,
    )


# --- Poisson 1D ------------------------------------------------------------

def poisson_exact(x):
    return ad.sin(PI * _col(x, 0))


def poisson_forcing(x: np.ndarray) -> np.ndarray:
    return -PI ** 2 * np.sin(PI * x[:, :1])


def _poisson_residual(model, x):
    u = model(ad.seed_inputs(x, (0,)))
    _, uxx = ad.input_derivatives(u, 0)
    return uxx - poisson_forcing(x)


def _poisson_boundary_sampler(rng, n):
    # the boundary is {0, 1}; alternate so both ends are always present
    return (np.arange(n) % 2).astype(np.float64)[:, None]


def poisson1d() -> PinnProblem:
    return PinnProblem(
        name="poisson1d", input_dim=1, output_dim=1,
        residual=_poisson_residual,
        boundary=_dirichlet_zero,
        sample_domain=lambda rng, n: uniform_box(rng, n, (0.0,), (1.0,)),
        sample_boundary=_poisson_boundary_sampler,
        reference=poisson_exact,
        test_points=lambda: np.linspace(0.0, 1.0, 1024)[:, None],
        exact=poisson_exact,
        hidden=(20, 20),
    )
