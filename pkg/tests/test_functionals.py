"""Weighted functionals, decay weights, reports, and smallness gates."""

import json
import math

import numpy as np
import pytest

from cylmode.grid import build_grid
from cylmode.state import (
    ModeState,
    Params,
    make_initial_state,
    make_profile_divfree,
    make_random_divfree_state,
)
from cylmode.stepper import StepConfig, run
from cylmode import functionals as F


def _params(nu=1.0, K=3, N=3, eta=0.2, delta=0.1, m=3, sigma=0.4):
    return Params(N=N, nu=nu, delta=delta, eta=eta, K=K, m=m, sigma=sigma)


@pytest.fixture(scope="module")
def grid():
    return build_grid(n_r=24, n_z=32, L_z=2.0 * np.pi)


def _smooth_profile(grid, amplitude=1.0):
    r = grid.r
    env = (1.0 - r**2) ** 2
    a_r = amplitude * (env * r)[:, None] * np.sin(grid.z)[None, :]
    a_z = amplitude * env[:, None] * np.cos(grid.z)[None, :]
    zero = np.zeros_like(a_r)
    return make_profile_divfree(grid, a_r, a_z, zero, zero)


def _accumulate_run(grid, p, seed=3, n_steps=5, dt=1e-3, mixed=False,
                    nonlinear=True, state=None):
    st = state if state is not None else make_random_divfree_state(
        grid, p, seed=seed, amplitude=1e-2)
    hist = F.EnergyHistory(j_max=1, mixed=mixed)
    F.accumulate(hist, st)
    sink_hist = hist

    def snap(s):
        if s.t > 0.0:
            F.accumulate(sink_hist, s)

    from cylmode.stepper import RunSinks
    run(st, StepConfig(dt=dt, t_end=n_steps * dt, nonlinear=nonlinear),
        sinks=RunSinks(on_snapshot=snap))
    return hist


class TestAccumulate:
    def test_zero_stream_all_zero(self, grid):
        p = _params()
        hist = F.EnergyHistory()
        for i in range(3):
            st = ModeState.zeros(grid, p, t=0.1 * i)
            F.accumulate(hist, st)
        assert F.compute_E(hist, 0, p) == 0.0
        assert F.compute_D(hist, 1, p) == 0.0
        assert hist.error_estimate == 0.0

    def test_constant_state_linear_integrals(self, grid):
        p = _params()
        base = make_random_divfree_state(grid, p, seed=1)
        hist = F.EnergyHistory()
        for i in range(6):
            st = base.copy()
            st.t = 0.1 * i
            F.accumulate(hist, st)
        t_final = 0.5
        for name in ("inst_0_1", "grad_1_2", "over_r_0_3", "axis_pair_0"):
            v = hist.value_at(name)
            assert hist.integral_at(name) == pytest.approx(
                t_final * v, rel=1e-12)

    def test_decaying_mode_integral_oracle(self, grid):
        # ||u(t)||^2 = e^(-2 lambda t) ||u(0)||^2 integrates in closed form
        p = _params()
        lam, t_end, dt = 1.0, 0.5, 0.025
        base = make_random_divfree_state(grid, p, seed=2)
        hist = F.EnergyHistory()
        n = int(round(t_end / dt))
        for i in range(n + 1):
            t = dt * i
            st = base.copy()
            st.t = t
            for m in st.modes:
                m.set_fields(tuple(math.exp(-lam * t) * f
                                   for f in m.fields()))
            F.accumulate(hist, st)
        exact_factor = (1.0 - math.exp(-2.0 * lam * t_end)) / (2.0 * lam)
        got = hist.integral_at("inst_0_1")
        want = exact_factor * hist.value_at("inst_0_1", 0)
        # trapezoid error is second order in the snapshot spacing
        assert got == pytest.approx(want, rel=3.0 * dt**2)
        assert abs(got - want) <= 2.0 * hist.error_estimate

    def test_non_monotone_time_rejected(self, grid):
        p = _params()
        hist = F.EnergyHistory()
        st = ModeState.zeros(grid, p, t=1.0)
        F.accumulate(hist, st)
        with pytest.raises(ValueError, match="advance"):
            F.accumulate(hist, st)

    def test_running_integrals_non_decreasing(self, grid):
        p = _params()
        hist = _accumulate_run(grid, p)
        for name in ("grad_0_1", "dr_1_0", "over_r_0_2"):
            series = hist.integral_series(name)
            assert np.all(np.diff(series) >= 0.0)

    def test_history_roundtrip(self, grid, tmp_path):
        p = _params()
        hist = _accumulate_run(grid, p, mixed=True)
        path = str(tmp_path / "hist.npz")
        F.save_history(hist, path)
        loaded = F.load_history(path)
        assert loaded.times == hist.times
        assert loaded.error_estimate == hist.error_estimate
        for j in (0, 1):
            assert F.compute_E(loaded, j, p) == F.compute_E(hist, j, p)
            assert F.compute_D(loaded, j, p) == F.compute_D(hist, j, p)


class TestWeightedFunctionals:
    def test_initial_single_mode_value(self, grid):
        # with data riding harmonic 1 only and no elapsed time, both
        # functionals reduce to N^(-2 eta) times the squared norm
        p = _params()
        prof = _smooth_profile(grid)
        st = make_initial_state(prof, p)
        hist = F.EnergyHistory()
        F.accumulate(hist, st)
        for j in (0, 1):
            inst = sum(grid.quad(grid.dz_pow(f, j) ** 2)
                       for f in st.modes[1].fields())
            want = p.N ** (-2.0 * p.eta) * inst
            assert F.compute_E(hist, j, p) == pytest.approx(want, rel=1e-12)
            assert F.compute_D(hist, j, p) == pytest.approx(want, rel=1e-12)

    def test_two_mode_hand_oracle(self, grid):
        # hand-set channel values recomputed against the printed formula
        p = _params(K=2, N=4, eta=0.2, delta=0.1, m=3, sigma=0.4)
        hist = F.EnergyHistory()
        hist.times = [0.0]
        hist.K, hist.N = 2, 4
        vals = {
            "inst_0_0": 0.3, "grad_0_0": 0.2, "dr_0_0": 0.15,
            "axis_pair_0": 0.1,
            "inst_0_1": 2.0, "grad_0_1": 1.0, "dr_0_1": 0.7,
            "over_r_0_1": 0.5,
            "inst_0_2": 0.8, "grad_0_2": 0.4, "dr_0_2": 0.3,
            "over_r_0_2": 0.25,
        }
        for name, v in vals.items():
            ch = hist._channel(name)
            ch.values = [v]
            ch.integral = [v]  # pretend unit-time integrals
        N, eta = 4.0, 0.2
        mean = N ** (2 * (0.25 - eta)) * (0.3 + 0.2 + 0.1)
        k1 = 1 * N ** (2 * eta * -1) * (2.0 + 1.0 + 0.5 * N**2 * 0.5)
        k2 = 4 * N ** 0.0 * (0.8 + 0.4 + 0.5 * (2 * N) ** 2 * 0.25)
        assert F.compute_E(hist, 0, p) == pytest.approx(
            mean + max(k1, k2), rel=1e-14)
        m, sig, delta = 3, 0.4, 0.1
        mean_d = N ** (2 * (0.25 - eta)) * (0.3 + 0.15 + 0.1)
        d1 = (1 ** (2 * sig * m) * N ** (2 * min(-eta, (0.5 - eta - delta) * m))
              * (2.0 + 0.7 + 0.5 * N**2 * 0.5))
        d2 = (2 ** (2 * sig * m) * N ** 0.0
              * (0.8 + 0.3 + 0.5 * (2 * N) ** 2 * 0.25))
        assert F.compute_D(hist, 0, p) == pytest.approx(
            mean_d + max(d1, d2), rel=1e-14)

    def test_quadratic_homogeneity(self, grid):
        p = _params()
        base = make_random_divfree_state(grid, p, seed=4)
        hists = []
        for lam in (1.0, 2.0):
            hist = F.EnergyHistory()
            for i in range(3):
                st = base.copy()
                st.t = 0.05 * i
                for m in st.modes:
                    m.set_fields(tuple(lam * f for f in m.fields()))
                F.accumulate(hist, st)
            hists.append(hist)
        for j in (0, 1):
            assert F.compute_E(hists[1], j, p) == 4.0 * F.compute_E(
                hists[0], j, p)

    def test_prefix_monotone(self, grid):
        p = _params()
        hist = _accumulate_run(grid, p, n_steps=6)
        for j in (0, 1):
            vals = [F.compute_E(hist, j, p, idx=i)
                    for i in range(hist.n_snapshots)]
            assert all(b >= a * (1.0 - 1e-12)
                       for a, b in zip(vals, vals[1:]))

    def test_bad_inputs(self, grid):
        p = _params()
        hist = F.EnergyHistory()
        with pytest.raises(ValueError, match="empty"):
            F.compute_E(hist, 0, p)
        F.accumulate(hist, ModeState.zeros(grid, p))
        with pytest.raises(ValueError, match="out of range"):
            F.compute_E(hist, 2, p)
        with pytest.raises(ValueError, match="out of range"):
            F.compute_D(hist, -1, p)

    def test_stokes_run_functional_bounded(self, grid):
        # without nonlinearity the weighted functional cannot grow past
        # its initial value by more than discretization slack
        p = _params()
        prof = _smooth_profile(grid, amplitude=1e-2)
        st = make_initial_state(prof, p)
        hist = F.EnergyHistory()
        F.accumulate(hist, st)
        e00 = F.compute_E(hist, 0, p)
        hist2 = _accumulate_run(grid, p, n_steps=10, nonlinear=False,
                                state=st)
        assert F.compute_E(hist2, 0, p) <= 2.0 * e00


class TestDecayWeights:
    def test_spot_values(self):
        p = _params(N=4, eta=0.25, delta=0.0, m=3, sigma=0.4)
        w = F.decay_weights(p)
        assert w.theta[2] == pytest.approx(2.0 ** (-0.4 * 3), rel=1e-14)
        assert w.theta[1] == pytest.approx(4.0 ** 0.25, rel=1e-14)
        assert w.A[0] == 5  # floor(0.25 * 3 / 0.25) + 2
        assert w.A[1] == 4

    def test_weight_inequalities(self):
        for (N, eta, delta, m, sigma) in [(3, 0.2, 0.1, 3, 0.4),
                                          (8, 0.25, 0.0, 4, 0.3),
                                          (16, 0.3, 0.05, 5, 0.2)]:
            p = _params(N=N, eta=eta, delta=delta, m=m, sigma=sigma, K=6,
                        nu=0.0)
            w = F.decay_weights(p)
            for k in range(1, 7):
                assert w.theta[k] <= k ** (-sigma * m) * N**eta + 1e-15
                assert w.theta[k] <= k ** -sigma * w.theta_tilde[k] + 1e-15
                assert (w.theta_tilde[k]
                        <= k ** (-sigma * (m - 1)) * N**eta + 1e-15)

    def test_no_azimuthal_gain_never_saturates(self):
        p = _params(eta=0.0)
        w = F.decay_weights(p)
        assert w.A[0] == math.inf and w.A[1] == math.inf


class TestDecayReport:
    def test_zero_run_trivially_passes(self, grid):
        p = _params()
        hist = F.EnergyHistory()
        for i in range(3):
            F.accumulate(hist, ModeState.zeros(grid, p, t=0.1 * i))
        rep = F.decay_report(hist, p)
        assert all(row["ratio"] == 0.0 for row in rep.per_mode)
        assert rep.pass_flags["ratios_finite"]
        assert rep.pass_flags["monotone_envelope"]
        assert not rep.metadata["cascade"]

    def test_stokes_run_has_no_cascade(self, grid):
        p = _params()
        prof = _smooth_profile(grid, amplitude=1e-2)
        st = make_initial_state(prof, p)
        hist = _accumulate_run(grid, p, n_steps=5, nonlinear=False, state=st)
        rep = F.decay_report(hist, p)
        assert not rep.metadata["cascade"]
        assert rep.metadata["truncation_leakage"] < 1e-12
        k1_rows = [r for r in rep.per_mode if r["k"] == 1]
        assert all(r["ratio"] == pytest.approx(1.0) for r in k1_rows)

    def test_fitted_rate_recovers_exponential(self):
        rho = 0.7
        p = _params(K=5)
        hist = F.EnergyHistory()
        hist.times = [0.0]
        hist.K, hist.N = 5, p.N
        for j in (0, 1):
            for k in range(6):
                ch = hist._channel(f"inst_{j}_{k}")
                ch.values = [math.exp(-2.0 * rho * k)]
                ch.integral = [0.0]
            for name in (f"grad_{j}_0", f"dr_{j}_0", f"over_r_{j}_0",
                         f"axis_pair_{j}"):
                ch = hist._channel(name)
                ch.values = [0.0]
                ch.integral = [0.0]
        rep = F.decay_report(hist, p)
        assert rep.fitted["rate_j0"] == pytest.approx(rho, rel=1e-10)
        assert rep.fitted["rate_j1"] == pytest.approx(rho, rel=1e-10)

    def test_json_and_csv_outputs(self, grid, tmp_path):
        import csv

        p = _params()
        hist = _accumulate_run(grid, p)
        rep = F.decay_report(hist, p)
        d = rep.to_json_dict()
        assert d["schema"] == "cylmode-report-v1"
        assert set(d) == {"schema", "params", "per_mode", "ratios",
                          "pass_flags", "fitted", "metadata"}
        jpath = str(tmp_path / "report.json")
        F.write_report_json(rep, jpath)
        with open(jpath) as fh:
            assert json.load(fh) == json.loads(
                json.dumps(rep.to_json_dict()))
        cpath = str(tmp_path / "report.csv")
        F.write_report_csv(rep, cpath)
        with open(cpath, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["k", "j", "sup_norm", "bound", "ratio"]
        assert len(rows) == 1 + 2 * p.K

    def test_report_deterministic(self, grid):
        p = _params()
        hist = _accumulate_run(grid, p)
        a = json.dumps(F.decay_report(hist, p).to_json_dict(), sort_keys=True)
        b = json.dumps(F.decay_report(hist, p).to_json_dict(), sort_keys=True)
        assert a == b

    def test_empty_history_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            F.decay_report(F.EnergyHistory(), _params())


class TestSmallness:
    def test_zero_profile_passes(self, grid):
        p = _params()
        zero = np.zeros((grid.n_r, grid.n_z))
        prof = make_profile_divfree(grid, zero, zero, zero, zero)
        vals, ok = F.smallness_check(prof, p)
        assert ok
        assert all(v == 0.0 for v in vals.values())

    def test_doubling_n_power_law(self, grid):
        prof = _smooth_profile(grid)
        p1 = _params(N=4, delta=0.1, eta=0.2)
        p2 = _params(N=8, delta=0.1, eta=0.2)
        lhs1 = F.smallness_check(prof, p1)[0]["ns"]
        lhs2 = F.smallness_check(prof, p2)[0]["ns"]
        hi = 2.0 ** -(0.25 - 0.1)
        lo = 2.0 ** -(0.5 - 0.1 - 0.2)
        assert min(hi, lo) * lhs1 <= lhs2 <= max(hi, lo) * lhs1

    def test_amplitude_gates_the_result(self, grid):
        p = _params(nu=0.0)
        small = _smooth_profile(grid, amplitude=1e-4)
        big = _smooth_profile(grid, amplitude=10.0)
        assert F.smallness_check(small, p)[1]
        assert not F.smallness_check(big, p)[1]

    def test_ans_regime_checks_both_conditions(self, grid):
        prof = _smooth_profile(grid)
        vals, _ = F.smallness_check(prof, _params(nu=0.0))
        assert vals["ans_sum"] > 0.0 and vals["ans_geo"] > 0.0
        assert vals["ns"] > 0.0


class TestMixedNormBounds:
    def test_requires_mixed_accumulation(self, grid):
        p = _params()
        hist = _accumulate_run(grid, p, mixed=False)
        with pytest.raises(ValueError, match="mixed"):
            F.mixed_norm_bounds(hist, p)

    def test_single_mode_run_finite_ratios(self, grid):
        p = _params()
        prof = _smooth_profile(grid, amplitude=1e-2)
        st = make_initial_state(prof, p)
        hist = _accumulate_run(grid, p, n_steps=5, nonlinear=False,
                               state=st, mixed=True)
        out = F.mixed_norm_bounds(hist, p)
        assert out["mode_l4"][1][0] > 0.0
        assert math.isfinite(out["mode_l4"][1][0])
        assert math.isfinite(out["mean_inf"])
        for k in range(1, p.K + 1):
            assert math.isfinite(out["mode_grad_inf"][k])

    def test_ratios_stable_under_refinement(self):
        vals = {}
        for n_r in (24, 48):
            g = build_grid(n_r=n_r, n_z=32, L_z=2.0 * np.pi)
            p = _params()
            r = g.r
            env = (1.0 - r**2) ** 2
            a_r = 1e-2 * (env * r)[:, None] * np.sin(g.z)[None, :]
            a_z = 1e-2 * env[:, None] * np.cos(g.z)[None, :]
            zero = np.zeros_like(a_r)
            prof = make_profile_divfree(g, a_r, a_z, zero, zero)
            st = make_initial_state(prof, p)
            hist = _accumulate_run(g, p, n_steps=5, nonlinear=False,
                                   state=st, mixed=True)
            vals[n_r] = F.mixed_norm_bounds(hist, p)["mode_l4"][1][0]
        assert abs(vals[48] - vals[24]) <= 0.3 * abs(vals[24])


class TestVerticalSobolev:
    def test_sums_instantaneous_norms(self, grid):
        p = _params()
        hist = _accumulate_run(grid, p)
        want = sum(hist.value_at(f"inst_{j}_{k}")
                   for k in range(p.K + 1) for j in (0, 1))
        assert F.vertical_sobolev_sq(hist, 1) == pytest.approx(want)
        with pytest.raises(ValueError):
            F.vertical_sobolev_sq(hist, 2)
