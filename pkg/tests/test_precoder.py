import numpy as np
import pytest

from beamsched.errors import SingularChannel
from beamsched.precoder import (
    EffectiveChannels,
    effective_submatrix,
    evaluate_rates,
    select_and_evaluate,
    spectral_cond,
    zf_precoder,
)

from conftest import make_random_context


def random_unit_columns(rng, n, m):
    a = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
    return a / np.linalg.norm(a, axis=0)


def make_eff(rng, n_users, sigma2=1e-3, power=2.0):
    u = rng.standard_normal((n_users, n_users)) + 1j * rng.standard_normal((n_users, n_users))
    return EffectiveChannels(u=u, noise_w=np.full(n_users, sigma2), power_w=power)


# --- effective_submatrix ------------------------------------------------------

def test_submatrix_singleton(rng):
    eff = make_eff(rng, 5)
    g = effective_submatrix(eff, [2])
    assert g.shape == (1, 1)
    assert g[0, 0] == eff.u[2, 2]


def test_submatrix_ascending_order(rng):
    # mirrors the footnoted indexing example: M = {2, 4, 5} in that order
    eff = make_eff(rng, 7)
    g = effective_submatrix(eff, {5, 2, 4})
    idx = [2, 4, 5]
    for a, ia in enumerate(idx):
        for b, ib in enumerate(idx):
            assert g[a, b] == eff.u[ia, ib]


def test_submatrix_manual_extraction(rng):
    eff = make_eff(rng, 4)
    g = effective_submatrix(eff, [1, 3])
    manual = np.array([[eff.u[1, 1], eff.u[1, 3]], [eff.u[3, 1], eff.u[3, 3]]])
    assert np.array_equal(g, manual)


def test_submatrix_rejects_duplicates(rng):
    eff = make_eff(rng, 4)
    with pytest.raises(ValueError):
        effective_submatrix(eff, [1, 1, 2])
    with pytest.raises(ValueError):
        effective_submatrix(eff, [])
    with pytest.raises(ValueError):
        effective_submatrix(eff, [5])


# --- zf_precoder --------------------------------------------------------------

def test_scalar_zf_closed_form(rng):
    # single user, unit-norm analog column: f* = sqrt(P) u* / |u|
    u = 0.7 - 1.3j
    p = 2.0
    analog = np.zeros((4, 1), dtype=complex)
    analog[1, 0] = 1.0
    f_star, norms = zf_precoder(np.array([[u]]), analog, p)
    expected = np.sqrt(p) * np.conj(u) / abs(u)
    assert abs(f_star[0, 0] - expected) < 1e-12
    assert abs(norms[0] - 1.0 / abs(u)) < 1e-12


def test_identity_channel_orthonormal_analog(rng):
    m, p = 3, 2.0
    analog = np.eye(5, dtype=complex)[:, :m]
    f_star, _ = zf_precoder(np.eye(m, dtype=complex), analog, p)
    assert np.allclose(f_star, np.sqrt(p / m) * np.eye(m), atol=1e-12)


def test_zf_inverts_g_and_matches_pinv(rng):
    p = 2.0
    for _ in range(50):
        g = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        if spectral_cond(g) > 50:
            continue
        analog = random_unit_columns(rng, 6, 3)
        f_star, norms = zf_precoder(g, analog, p)
        unnorm = f_star * norms / np.sqrt(p / 3)
        assert np.max(np.abs(g @ unnorm - np.eye(3))) < 1e-9
        # independently coded pseudo-inverse route
        oracle = np.linalg.pinv(g)
        assert np.max(np.abs(unnorm - oracle)) < 1e-9 * np.max(np.abs(oracle))


def test_power_split_exact(rng):
    p = 2.0
    for m in (1, 2, 4, 6):
        g = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        if spectral_cond(g) > 1e3:
            continue
        analog = random_unit_columns(rng, 8, m)
        f_star, _ = zf_precoder(g, analog, p)
        col_power = np.linalg.norm(analog @ f_star, axis=0) ** 2
        assert np.allclose(col_power, p / m, rtol=1e-9)
        assert abs(col_power.sum() - p) < 1e-9 * p


def test_singular_g_raises(rng):
    g = np.ones((2, 2), dtype=complex)
    analog = random_unit_columns(rng, 4, 2)
    with pytest.raises(SingularChannel):
        zf_precoder(g, analog, 1.0)


def test_cond_gate_threshold(rng):
    # diag(1, eps): cond = 1/eps
    analog = np.eye(2, dtype=complex)
    ok = np.diag([1.0, 1e-11]).astype(complex)
    zf_precoder(ok, analog, 1.0)
    bad = np.diag([1.0, 1e-13]).astype(complex)
    with pytest.raises(SingularChannel):
        zf_precoder(bad, analog, 1.0)


# --- evaluate_rates -----------------------------------------------------------

def test_single_user_rate(rng):
    n = 4
    eff = make_eff(rng, n, sigma2=1e-2, power=3.0)
    analog = random_unit_columns(rng, 6, n)
    weights = np.ones(n)
    res = select_and_evaluate(eff, analog, [2], weights)
    u22 = eff.u[2, 2]
    expected_sinr = 3.0 * abs(u22) ** 2 / 1e-2
    assert res.sinr[2] == pytest.approx(expected_sinr, rel=1e-12)
    assert res.rates[2] == pytest.approx(np.log2(1 + expected_sinr), rel=1e-12)
    assert np.all(res.rates[[0, 1, 3]] == 0)
    assert np.all(res.sinr[[0, 1, 3]] == 0)


def test_exact_zf_cross_terms_vanish(rng):
    for _ in range(30):
        ctx = make_random_context(rng, 6, n_bs=8)
        members = [1, 3, 4]
        g = effective_submatrix(ctx.eff, members)
        if spectral_cond(g) > 1e4:
            continue
        f_star, _ = zf_precoder(g, ctx.analog_matrix[:, members], ctx.eff.power_w)
        received = g @ f_star
        off = received[~np.eye(3, dtype=bool)]
        assert np.max(np.abs(off) ** 2) <= 1e-18 * ctx.eff.power_w


def test_zero_weights_zero_q(rng):
    eff = make_eff(rng, 3)
    analog = random_unit_columns(rng, 5, 3)
    g = effective_submatrix(eff, [0, 1])
    f_star, _ = zf_precoder(g, analog[:, [0, 1]], eff.power_w)
    res = evaluate_rates(eff, [0, 1], f_star, np.zeros(3))
    assert res.q_value == 0.0


def test_sinr_monotone_in_power(rng):
    ctx = make_random_context(rng, 5)
    members = [0, 2, 4]
    g = effective_submatrix(ctx.eff, members)
    analog = ctx.analog_matrix[:, members]
    res1 = evaluate_rates(ctx.eff, members, zf_precoder(g, analog, 1.0)[0], ctx.weights)
    res2 = evaluate_rates(ctx.eff, members, zf_precoder(g, analog, 2.0)[0], ctx.weights)
    sel = list(members)
    assert np.all(res2.sinr[sel] > res1.sinr[sel])


def test_q_matches_independent_full_channel_evaluation(rng):
    """Q from evaluate_rates vs a from-scratch evaluation that goes back to
    the physical quantities h and F_RF (the rewrite via u is exact)."""
    for _ in range(1000):
        n_users, n_bs = 6, 8
        h = (rng.standard_normal((n_users, n_bs))
             + 1j * rng.standard_normal((n_users, n_bs)))
        analog_full = random_unit_columns(rng, n_bs, n_users)
        u = h.conj() @ analog_full
        sigma2 = rng.uniform(1e-4, 1e-2, n_users)
        p = rng.uniform(0.5, 4.0)
        weights = rng.uniform(0.1, 2.0, n_users)
        eff = EffectiveChannels(u=u, noise_w=sigma2, power_w=p)
        m = np.sort(rng.choice(n_users, size=3, replace=False))
        g = effective_submatrix(eff, m)
        if spectral_cond(g) > 1e6:
            continue
        f_star, _ = zf_precoder(g, analog_full[:, m], p)
        res = evaluate_rates(eff, m, f_star, weights)

        # independent route: antenna-domain transmit vectors per user
        tx = analog_full[:, m] @ f_star               # (n_bs, |M|)
        q_oracle = 0.0
        for a, i in enumerate(m):
            gains = np.abs(h[i].conj() @ tx) ** 2
            sig = gains[a]
            interf = gains.sum() - sig
            q_oracle += weights[i] * np.log2(1 + sig / (interf + sigma2[i]))
        assert res.q_value == pytest.approx(q_oracle, rel=1e-12)


def test_effective_channels_validation():
    with pytest.raises(ValueError):
        EffectiveChannels(u=np.ones((2, 3)), noise_w=1e-3, power_w=1.0)
    with pytest.raises(ValueError):
        EffectiveChannels(u=np.full((2, 2), np.nan), noise_w=1e-3, power_w=1.0)
    with pytest.raises(ValueError):
        EffectiveChannels(u=np.ones((2, 2)), noise_w=0.0, power_w=1.0)
