"""Boundary machinery: hard overwrite, ghost rings, soft penalties."""

import numpy as np
import pytest

from picnn.tensor import Tensor
from picnn.constraints import (
    BoundarySpec, dirichlet, neumann, periodic,
    apply_hard_constraint, ghost_pad, boundary_penalty,
)


def field(seed=0, shape=(1, 1, 6, 8)):
    return Tensor(np.random.default_rng(seed).normal(size=shape))


def all_dirichlet(g=10.0):
    return BoundarySpec(dirichlet(g), dirichlet(g), dirichlet(g), dirichlet(g))


def darcy_like():
    # flow left -> right, sealed top/bottom
    return BoundarySpec(neumann(0.0), neumann(0.0), dirichlet(1.0), dirichlet(0.0))


def annulus_like(t_in=5.0):
    return BoundarySpec(dirichlet(t_in), dirichlet(0.0), periodic(), periodic())


class TestSpecValidation:
    def test_periodic_must_pair(self):
        with pytest.raises(ValueError):
            BoundarySpec(periodic(), dirichlet(0.0), dirichlet(0.0), dirichlet(0.0))

    def test_periodic_axes(self):
        assert annulus_like().periodic_axes == (1,)
        assert darcy_like().periodic_axes == ()

    def test_unknown_kind(self):
        from picnn.constraints import EdgeCondition
        with pytest.raises(ValueError):
            EdgeCondition("robin", 1.0)


class TestHardConstraint:
    def test_dirichlet_overwrites_border(self):
        u = field()
        out = apply_hard_constraint(u, all_dirichlet(10.0))
        d = out.data[0, 0]
        assert np.all(d[0, :] == 10.0) and np.all(d[-1, :] == 10.0)
        assert np.all(d[:, 0] == 10.0) and np.all(d[:, -1] == 10.0)
        assert np.allclose(d[1:-1, 1:-1], u.data[0, 0, 1:-1, 1:-1])

    def test_idempotent(self):
        for bc in (all_dirichlet(), darcy_like(), annulus_like()):
            u = field(3)
            once = apply_hard_constraint(u, bc)
            twice = apply_hard_constraint(once, bc)
            assert np.allclose(once.data, twice.data, atol=1e-15)

    def test_neumann_zero_flux_copies_neighbor(self):
        u = field(4)
        out = apply_hard_constraint(u, darcy_like()).data[0, 0]
        # interior columns of sealed rows equal their neighbors
        assert np.allclose(out[0, 1:-1], out[1, 1:-1])
        assert np.allclose(out[-1, 1:-1], out[-2, 1:-1])
        # dirichlet wins at corners
        assert out[0, 0] == 1.0 and out[0, -1] == 0.0

    def test_neumann_nonzero_flux(self):
        bc = BoundarySpec(neumann(2.0), neumann(0.0), dirichlet(0.0), dirichlet(0.0))
        u = field(5)
        hy = 0.25
        out = apply_hard_constraint(u, bc, h=(hy, 1.0)).data[0, 0]
        # one-sided outward difference (u0 - u1)/hy matches the flux
        got = (out[0, 1:-1] - out[1, 1:-1]) / hy
        assert np.allclose(got, 2.0)

    def test_periodic_edges_untouched(self):
        u = field(6)
        out = apply_hard_constraint(u, annulus_like(3.0)).data[0, 0]
        assert np.all(out[0, :] == 3.0) and np.all(out[-1, :] == 0.0)
        assert np.allclose(out[1:-1, :], u.data[0, 0, 1:-1, :])

    def test_array_valued_edge(self):
        vals = np.linspace(0.0, 1.0, 8)
        bc = BoundarySpec(dirichlet(vals), dirichlet(0.0), neumann(0.0), neumann(0.0))
        out = apply_hard_constraint(field(7), bc).data[0, 0]
        assert np.allclose(out[0, :], vals)

    def test_gradient_flows_through_interior_only(self):
        u = Tensor(np.random.default_rng(8).normal(size=(1, 1, 5, 5)), requires_grad=True)
        out = apply_hard_constraint(u, all_dirichlet(2.0))
        out.square().sum().backward()
        g = u.grad[0, 0]
        assert np.all(g[0, :] == 0.0) and np.all(g[:, 0] == 0.0)
        assert np.all(g[1:-1, 1:-1] != 0.0)


class TestGhostPad:
    def test_shape_growth(self):
        u = field(9, (2, 1, 6, 8))
        for bc in (all_dirichlet(), darcy_like(), annulus_like()):
            assert ghost_pad(u, bc, 2).shape == (2, 1, 10, 12)

    def test_periodic_wraps(self):
        u = field(10)
        g = ghost_pad(u, annulus_like(), 2).data[0, 0]
        core = u.data[0, 0]
        assert np.allclose(g[2:-2, :2], core[:, -2:])
        assert np.allclose(g[2:-2, -2:], core[:, :2])

    def test_dirichlet_constant_ring(self):
        u = field(11)
        g = ghost_pad(u, all_dirichlet(7.0), 1).data[0, 0]
        assert np.all(g[0, :] == 7.0) and np.all(g[:, 0] == 7.0)
        assert np.allclose(g[1:-1, 1:-1], u.data[0, 0])

    def test_neumann_zero_flux_mirrors(self):
        u = field(12)
        g = ghost_pad(u, darcy_like(), 2).data[0, 0]
        core = u.data[0, 0]
        # ghost(-d) = u(d): row above boundary mirrors row 1
        assert np.allclose(g[1, 2:-2], core[1, :])
        assert np.allclose(g[0, 2:-2], core[2, :])
        assert np.allclose(g[-1, 2:-2], core[-3, :])

    def test_neumann_flux_offset_gives_central_difference(self):
        q = 1.5
        hy = 0.2
        bc = BoundarySpec(neumann(q), neumann(0.0), dirichlet(0.0), dirichlet(0.0))
        u = field(13)
        g = ghost_pad(u, bc, 1, h=(hy, 1.0)).data[0, 0]
        core = u.data[0, 0]
        # outward normal at the top edge is -y: du/dn = (ghost - u(1)) / (2 hy) = q
        got = (g[0, 1:-1] - core[1, :]) / (2 * hy)
        assert np.allclose(got, q)

    def test_on_tape(self):
        u = Tensor(np.random.default_rng(14).normal(size=(1, 1, 5, 6)), requires_grad=True)
        ghost_pad(u, darcy_like(), 1).square().sum().backward()
        assert u.grad is not None and np.any(u.grad != 0.0)


class TestBoundaryPenalty:
    def test_zero_after_hard_apply(self):
        for bc in (all_dirichlet(4.0), darcy_like(), annulus_like(2.0)):
            u = apply_hard_constraint(field(15), bc, h=(0.1, 0.2))
            p = boundary_penalty(u, bc, h=(0.1, 0.2))
            assert p.item() < 1e-24

    def test_positive_when_violated(self):
        p = boundary_penalty(field(16), all_dirichlet(4.0))
        assert p.item() > 0.1

    def test_known_value(self):
        # 3x3 zeros, all-dirichlet g=1: every border cell errs by 1,
        # corners counted once per touching edge: 4 edges x 3 cells
        u = Tensor(np.zeros((1, 1, 3, 3)))
        p = boundary_penalty(u, all_dirichlet(1.0))
        assert abs(p.item() - 1.0) < 1e-14

    def test_neumann_uses_one_sided_difference(self):
        # u = y^2 on rows: du/dy = 2y; at top edge outward flux = -du/dy = 0 at y=0
        H, W = 6, 5
        hy = 0.3
        y = (np.arange(H) * hy)[:, None]
        u = Tensor(np.broadcast_to(y * y, (1, 1, H, W)).copy())
        bc = BoundarySpec(neumann(-hy), neumann(0.0), periodic(), periodic())
        # (u0 - u1)/hy = -hy exactly, so prescribing flux -hy zeroes the top term
        # bottom: (u5 - u4)/hy = (25-16)*hy = 9hy vs flux 0 -> mean over edges
        p = boundary_penalty(u, bc, h=(hy, 1.0)).item()
        expected = ((9 * hy) ** 2) * W / (2 * W)
        assert abs(p - expected) < 1e-12

    def test_all_periodic_is_zero(self):
        bc = BoundarySpec(periodic(), periodic(), periodic(), periodic())
        assert boundary_penalty(field(17), bc).item() == 0.0

    def test_gradient_flows(self):
        u = Tensor(np.random.default_rng(18).normal(size=(1, 1, 5, 5)), requires_grad=True)
        boundary_penalty(u, all_dirichlet(1.0)).backward()
        g = u.grad[0, 0]
        assert np.any(g[0, :] != 0.0)
        assert np.all(g[1:-1, 1:-1] == 0.0)
