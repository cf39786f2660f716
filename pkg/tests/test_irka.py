import numpy as np
import pytest
import scipy.sparse as sp

from pinball.irka import (
    bode_data,
    galerkin_reduce,
    initial_state,
    irka,
    realify_orthonormalize,
    saddle_interp_solve,
)
from pinball.model import (
    QuadraticDaeModel,
    ReducedQuadraticModel,
    fom_transfer,
    rom_transfer,
)
from pinball.steady import linearize, solve_steady


def ode_model(n, m=2, p=2, seed=0, stable=True):
    """Synthetic unconstrained model (empty algebraic block)."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    if stable:
        A = A - (np.linalg.eigvals(A).real.max() + 0.5) * np.eye(n)
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((p, n))
    return QuadraticDaeModel(
        E11=sp.identity(n, format="csr"),
        A11=sp.csr_matrix(A),
        A21=sp.csr_matrix((0, n)),
        B1=B, C=C,
        N=lambda v, w: np.zeros(n),
    )


class TestSaddleSolve:
    def test_matches_dense_oracle(self):
        mdl = ode_model(12, seed=1)
        sigma = 0.7 + 1.3j
        b = np.array([1.0, -2.0])
        phi = saddle_interp_solve(mdl, sigma, b)
        dense = np.linalg.solve(
            sigma * np.eye(12) - mdl.A11.toarray(), mdl.B1 @ b)
        assert np.linalg.norm(phi - dense) < 1e-12 * np.linalg.norm(dense)

    def test_zero_direction(self):
        mdl = ode_model(8)
        phi = saddle_interp_solve(mdl, 1.0 + 0.5j, np.zeros(2))
        assert np.abs(phi).max() == 0.0

    def test_conjugate_symmetry(self):
        mdl = ode_model(10, seed=2)
        b = np.array([0.3 + 0.1j, -1.0 + 0.4j])
        phi = saddle_interp_solve(mdl, 0.5 + 2.0j, b)
        phic = saddle_interp_solve(mdl, 0.5 - 2.0j, b.conjugate())
        assert np.allclose(phic, phi.conjugate(), atol=1e-12)

    def test_constraint_satisfied(self, coarse_space):
        ss = solve_steady(coarse_space, 30.0)
        mdl = linearize(coarse_space, ss)
        phi = saddle_interp_solve(mdl, 1.0 + 1.0j,
                                  np.array([1.0, 0.0, 0.0]))
        rel = np.linalg.norm(mdl.A21 @ phi) / np.linalg.norm(phi)
        assert rel < 1e-10


class TestRealifyOrthonormalize:
    def test_real_input_orthonormalized(self):
        rng = np.random.default_rng(0)
        n = 40
        M = sp.diags(1.0 + rng.random(n))
        V = rng.standard_normal((n, 6)).astype(complex)
        Phi = realify_orthonormalize(V, M)
        assert Phi.shape == (n, 6)
        gram = Phi.T @ (M @ Phi)
        assert np.abs(gram - np.eye(6)).max() < 1e-10

    def test_conjugate_pair_span(self):
        rng = np.random.default_rng(1)
        n = 30
        M = sp.identity(n, format="csr")
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        V = np.column_stack([v, v.conjugate()])
        Phi = realify_orthonormalize(V, M)
        assert Phi.shape == (n, 2)
        assert np.abs(Phi.imag).max() == 0.0 if np.iscomplexobj(Phi) else True
        # projectors onto span{Re v, Im v} and span{Phi} agree
        W = np.column_stack([v.real, v.imag])
        P_ref = W @ np.linalg.solve(W.T @ W, W.T)
        P_new = Phi @ Phi.T
        assert np.abs(P_ref - P_new).max() < 1e-10

    def test_rank_deficiency_drops_column(self):
        rng = np.random.default_rng(2)
        n = 20
        M = sp.identity(n, format="csr")
        v = rng.standard_normal(n)
        V = np.column_stack([v, 2.0 * v]).astype(complex)
        with pytest.warns(UserWarning, match="dependent"):
            Phi = realify_orthonormalize(V, M)
        assert Phi.shape == (n, 1)


class TestGalerkinReduce:
    def test_identity_embedding_reproduces_fom(self):
        mdl = ode_model(6, seed=3)
        rom = galerkin_reduce(mdl, np.eye(6))
        for s in (0.3, 1.0 + 2.0j):
            assert np.allclose(rom_transfer(rom, s), fom_transfer(mdl, s),
                               atol=1e-10)

    def test_quadratic_consistency(self, coarse_space):
        from pinball.kron import kron_vec

        ss = solve_steady(coarse_space, 30.0)
        mdl = linearize(coarse_space, ss)
        rng = np.random.default_rng(4)
        Phi = realify_orthonormalize(
            rng.standard_normal((mdl.n1, 4)).astype(complex), mdl.E11)
        rom = galerkin_reduce(mdl, Phi)
        z = rng.standard_normal(rom.r)
        x = Phi @ z
        direct = Phi.T @ mdl.N(x, x)
        assert np.linalg.norm(direct - rom.Ntil @ kron_vec(z, z)) < 1e-10

    def test_fast_and_generic_paths_agree(self, coarse_space):
        ss = solve_steady(coarse_space, 30.0)
        mdl = linearize(coarse_space, ss)
        rng = np.random.default_rng(5)
        Phi = realify_orthonormalize(
            rng.standard_normal((mdl.n1, 3)).astype(complex), mdl.E11)
        fast = galerkin_reduce(mdl, Phi)
        mdl.N_reduced = None
        slow = galerkin_reduce(mdl, Phi)
        assert np.abs(fast.Ntil - slow.Ntil).max() < 1e-12

    def test_output_row_bound(self):
        mdl = ode_model(8, seed=6)
        Q, _ = np.linalg.qr(np.random.default_rng(7).standard_normal((8, 3)))
        rom = galerkin_reduce(mdl, Q)
        for i in range(mdl.p):
            assert (np.linalg.norm(rom.Ctil[i])
                    <= np.linalg.norm(mdl.C[i]) * np.linalg.norm(Q, 2) + 1e-12)


class TestIrkaFixedPoint:
    def test_full_order_is_exact(self):
        mdl = ode_model(6, m=2, p=2, seed=8)
        st, Phi, rom = irka(mdl, 6, tol=1e-6, seed=0)
        for s in (0.5, 1.0 + 1.0j, 10.0):
            assert np.allclose(rom_transfer(rom, s), fom_transfer(mdl, s),
                               atol=1e-8)

    def test_interpolation_at_converged_shifts(self):
        mdl = ode_model(30, m=2, p=3, seed=9)
        st, Phi, rom = irka(mdl, 8, tol=1e-6, seed=0)
        for s, b in zip(st.shifts, st.directions):
            Gf = fom_transfer(mdl, s) @ b
            Gr = rom_transfer(rom, s) @ b
            assert (np.linalg.norm(Gf - Gr)
                    <= 1e-8 * np.linalg.norm(Gf))

    def test_conjugate_closure_and_stability(self):
        mdl = ode_model(30, m=2, p=3, seed=9)
        st, _, _ = irka(mdl, 8, tol=1e-6, seed=0)
        assert np.all(st.shifts.real > 0)
        for i, s in enumerate(st.shifts):
            if abs(s.imag) > 1e-12:
                j = np.argmin(np.abs(st.shifts - s.conjugate()))
                assert abs(st.shifts[j] - s.conjugate()) < 1e-8 * abs(s)
                assert np.allclose(st.directions[j],
                                   st.directions[i].conjugate(), atol=1e-8)

    def test_spectral_consistency_at_tight_tolerance(self):
        mdl = ode_model(30, m=2, p=3, seed=10)
        st, _, rom = irka(mdl, 6, tol=1e-8, max_iter=300, seed=0)
        lam = np.linalg.eigvals(np.linalg.solve(rom.Etil, rom.Atil))
        mirrored = np.sort_complex(-lam)
        assert np.allclose(np.sort_complex(st.shifts), mirrored, atol=1e-6)

    def test_unstable_model_mirrors_into_left_half_plane(self):
        rng = np.random.default_rng(11)
        A = rng.standard_normal((12, 12))
        A = A - (np.linalg.eigvals(A).real.max() - 0.3) * np.eye(12)
        mdl = QuadraticDaeModel(
            E11=sp.identity(12, format="csr"), A11=sp.csr_matrix(A),
            A21=sp.csr_matrix((0, 12)),
            B1=rng.standard_normal((12, 2)), C=rng.standard_normal((2, 12)),
            N=lambda v, w: np.zeros(12))
        with pytest.warns(UserWarning, match="left half plane"):
            st, _, rom = irka(mdl, 12, tol=1e-10, max_iter=50, seed=0)
        # mirrored unstable eigenvalues stay on the left; none of the
        # shifts may sit on a pole of the reduced pencil
        assert np.any(st.shifts.real < 0)
        lam = np.linalg.eigvals(np.linalg.solve(rom.Etil, rom.Atil))
        gap = np.abs(st.shifts[:, None] - lam[None, :]).min()
        assert gap > 1e-8

    def test_nonconvergence_returns_best_with_warning(self):
        mdl = ode_model(30, m=2, p=3, seed=9)
        with pytest.warns(UserWarning, match="did not converge"):
            st, Phi, rom = irka(mdl, 8, tol=1e-14, max_iter=3, seed=0)
        assert not st.converged
        # interpolation still exact at the returned shifts
        s, b = st.shifts[0], st.directions[0]
        Gf = fom_transfer(mdl, s) @ b
        Gr = rom_transfer(rom, s) @ b
        assert np.linalg.norm(Gf - Gr) <= 1e-8 * np.linalg.norm(Gf)


class TestBodeData:
    def test_scalar_closed_form(self):
        rom = ReducedQuadraticModel(
            Etil=np.eye(1), Atil=np.array([[-1.0]]), Btil=np.eye(1),
            Ctil=np.eye(1), Ntil=np.zeros((1, 1)), Phi=np.eye(1))
        omegas = np.array([0.0, 1.0, 10.0])
        mags = bode_data(rom, omegas)
        assert np.allclose(mags, 1.0 / np.sqrt(1.0 + omegas**2), atol=1e-12)

    def test_high_frequency_rolloff(self):
        mdl = ode_model(10, seed=12)
        mags = bode_data(mdl, np.array([1e2, 1e4, 1e6]))
        assert mags[0] > mags[1] > mags[2]
        assert mags[2] < 1e-4

    def test_rom_tracks_fom_near_shifts(self):
        mdl = ode_model(30, m=2, p=3, seed=9)
        st, _, rom = irka(mdl, 8, tol=1e-6, seed=0)
        omegas = np.abs(st.shifts.imag[np.abs(st.shifts.imag) > 1e-8])
        if len(omegas) == 0:
            omegas = np.abs(st.shifts.real[:2])
        f = bode_data(mdl, omegas)
        g = bode_data(rom, omegas)
        assert np.abs(f - g).max() < 0.05 * np.abs(f).max()
