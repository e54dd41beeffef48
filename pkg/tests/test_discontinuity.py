import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import emtsim as em

H = 0.1


def open_circuit(l1=1.0, l2=1.0, v1=0.0, v2=0.0):
    return em.build_fig1_circuit(l1, l2, v1_fn=lambda t: v1, v2_fn=lambda t: v2,
                                 v1dot_fn=lambda t: 0.0, v2dot_fn=lambda t: 0.0,
                                 switch_closed=False)


def post_event_state(i1=0.06, i2=0.04, u=0.1):
    x = np.array([i1, i2])
    return em.SystemState(0.0, x, np.array([u]), np.array([u, u]),
                          xddot=np.zeros(2), ydot=np.zeros(1))


class TestHandleCda:
    def test_first_half_step_excursion(self):
        # b0 = h/2 = 0.05, mismatch 0.1: u = -(1/2)(1/0.05)(0.1) = -1.0
        circ = open_circuit()
        sink = []
        em.handle_cda(circ, post_event_state(), H, sink=sink)
        half = sink[0].state
        assert half.y[0] == pytest.approx(-1.0, abs=1e-11)
        assert abs(half.x.sum()) <= 1e-10

    def test_reportability_flags(self):
        circ = open_circuit()
        sink = []
        final = em.handle_cda(circ, post_event_state(), H, sink=sink)
        assert [r.reportable for r in sink] == [False, True]
        assert sink[1].state is final
        assert final.t == 0.0 + H

    def test_no_excursion_without_mismatch(self):
        circ = open_circuit(l1=2.0, l2=1.0, v1=3.0, v2=3.0)
        st0 = post_event_state(i1=0.05, i2=-0.05, u=3.0)
        sink = []
        em.handle_cda(circ, st0, H, sink=sink)
        # balanced currents: u is the weighted source average at both halves
        assert sink[0].state.y[0] == pytest.approx(3.0, abs=1e-11)
        assert sink[1].state.y[0] == pytest.approx(3.0, abs=1e-11)


class TestHandlePreliminary:
    def test_no_voltage_excursion_but_udot_excursion(self):
        circ = open_circuit()
        zh = em.make_taylor2(H / 2)
        sink = []
        em.handle_preliminary(circ, post_event_state(), H, zh, sink=sink)
        half = sink[0].state
        assert half.y[0] == pytest.approx(0.0, abs=1e-11)
        # udot = -(L1L2/(L1+L2)) * i_sum / c0 with c0 of the half step
        want = -0.5 * 0.1 / zh.c0
        assert half.ydot[0] == pytest.approx(want, rel=1e-9)

    def test_udot_excursion_vanishes_without_mismatch(self):
        circ = open_circuit()
        sink = []
        em.handle_preliminary(circ, post_event_state(0.05, -0.05, 0.0), H,
                              em.make_taylor2(H / 2), sink=sink)
        assert sink[0].state.ydot[0] == pytest.approx(0.0, abs=1e-9)

    def test_rejects_history_using_coefficients(self):
        circ = open_circuit()
        with pytest.raises(em.UsageError):
            em.handle_preliminary(circ, post_event_state(), H,
                                  em.make_obreshkov22(H / 2))


class TestHandleImproved:
    POLICY = em.DiscontinuityPolicy("improved", 0.01)

    def test_substep_values(self):
        # eps = 0.001: step-1 u = -(1/2)(1/0.001)(0.1) = -50, ydot forced 0;
        # step-2 has zero mismatch so u = 0 and udot = 0
        circ = open_circuit()
        sink = []
        em.handle_improved(circ, post_event_state(), H, self.POLICY,
                           em.make_taylor2, sink=sink)
        s1, s2, s3 = (r.state for r in sink)
        assert s1.y[0] == pytest.approx(-50.0, rel=1e-10)
        assert np.array_equal(s1.ydot, np.zeros(1))
        assert s2.y[0] == pytest.approx(0.0, abs=1e-9)
        assert s2.ydot[0] == pytest.approx(0.0, abs=1e-7)

    def test_three_substeps_one_reportable(self):
        circ = open_circuit()
        sink = []
        final = em.handle_improved(circ, post_event_state(), H, self.POLICY,
                                   em.make_taylor2, sink=sink)
        assert [r.reportable for r in sink] == [False, False, True]
        assert final.t == 0.0 + H  # sub-steps sum exactly to h

    def test_substep_times(self):
        circ = open_circuit()
        sink = []
        em.handle_improved(circ, post_event_state(), H, self.POLICY,
                           em.make_taylor2, sink=sink)
        eps = 0.01 * H
        assert sink[0].state.t == pytest.approx(eps, rel=1e-12)
        assert sink[1].state.t == pytest.approx(eps + (H - eps) / 2, rel=1e-12)

    @given(py=st.floats(-1e6, 1e6, allow_nan=False))
    def test_step1_invariant_to_artificial_ydot(self, py):
        # the tiny backward-Euler step never reads the stored ydot, so any
        # prior value yields bit-identical x, y
        circ = open_circuit()
        base = post_event_state()
        sink_a = []
        em.handle_improved(circ, base, H, self.POLICY, em.make_taylor2,
                           sink=sink_a)
        tweaked = post_event_state()
        tweaked.ydot = np.array([py])
        sink_b = []
        em.handle_improved(circ, tweaked, H, self.POLICY, em.make_taylor2,
                           sink=sink_b)
        assert np.array_equal(sink_a[0].state.x, sink_b[0].state.x)
        assert np.array_equal(sink_a[0].state.y, sink_b[0].state.y)
        # and the artificial value never leaks into steps 2-3
        assert np.array_equal(sink_a[2].state.x, sink_b[2].state.x)
        assert np.array_equal(sink_a[2].state.y, sink_b[2].state.y)

    def test_policy_variant_checked(self):
        circ = open_circuit()
        with pytest.raises(em.UsageError):
            em.handle_improved(circ, post_event_state(), H,
                               em.DiscontinuityPolicy("preliminary"),
                               em.make_taylor2)


class TestExcursionScaling:
    def test_bem_excursion_doubles_when_b0_halved(self):
        circ = open_circuit(l1=1.3, l2=0.6)
        wavg = 0.0
        excursions = []
        for h in (H, H / 2):
            s = em.step(circ, post_event_state(), em.make_bem(h), h,
                        em.NewtonSettings(tol=1e-12))
            excursions.append(s.y[0] - wavg)
        assert abs(excursions[1] - 2.0 * excursions[0]) <= 1e-10 * abs(excursions[1])

    @pytest.mark.parametrize("i_sum", [0.0, 0.05, 0.1])
    def test_second_order_voltage_invariant_to_mismatch(self, i_sum):
        circ = open_circuit(l1=1.3, l2=0.6, v1=0.2, v2=-0.4)
        st0 = post_event_state(i1=0.6 * i_sum, i2=0.4 * i_sum, u=0.0)
        s = em.step(circ, st0, em.make_taylor2(H), H,
                    em.NewtonSettings(tol=1e-12))
        want = (0.6 * 0.2 + 1.3 * (-0.4)) / 1.9  # weighted source average
        assert s.y[0] == pytest.approx(want, abs=1e-12)


class TestPolicyAndEvents:
    def test_policy_validation(self):
        with pytest.raises(em.ParameterError):
            em.DiscontinuityPolicy("magic")
        with pytest.raises(em.ParameterError):
            em.DiscontinuityPolicy("improved", eps_fraction=0.5)
        with pytest.raises(em.ParameterError):
            em.DiscontinuityPolicy("improved", eps_fraction=0.0)

    def test_event_validation(self):
        with pytest.raises(em.ParameterError):
            em.Event(-1.0, "open_switch")
        with pytest.raises(em.ParameterError):
            em.validate_events([em.Event(0.2, "a"), em.Event(0.1, "b")])
        with pytest.raises(em.ParameterError):
            em.validate_events([em.Event(0.2, "a"), em.Event(0.2, "b")])


class TestAdvance:
    def test_no_events_matches_plain_stepping(self):
        circ = open_circuit(v1=0.3, v2=-0.1)
        state_a = post_event_state(0.05, -0.05, 0.1)
        state_b = post_event_state(0.05, -0.05, 0.1)
        policy = em.DiscontinuityPolicy("improved")
        for _ in range(3):
            state_a, _ = em.advance(circ, state_a, H, [], policy,
                                    em.make_taylor2, em.make_taylor2)
            state_b = em.step(circ, state_b, em.make_taylor2(H), H)
        assert np.array_equal(state_a.x, state_b.x)
        assert np.array_equal(state_a.y, state_b.y)
        assert state_a.t == state_b.t

    def test_event_at_boundary_mutates_then_dispatches(self):
        circ = em.build_fig1_circuit(1.0, 1.0, switch_closed=True)
        st0 = em.fig1_initial_state(circ, 0.06, 0.04, second_order=True)
        events = [em.Event(0.0, "open_switch")]
        final, records = em.advance(circ, st0, H, events,
                                    em.DiscontinuityPolicy("improved"),
                                    em.make_obreshkov22, em.make_taylor2)
        assert not circ.meta["mode"]["closed"]
        assert [r.reportable for r in records] == [False, False, True]
        assert abs(final.x.sum()) <= 1e-10

    def test_interior_event_rejected(self):
        circ = open_circuit()
        events = [em.Event(0.05, "open_switch")]
        with pytest.raises(em.SchedulingError):
            em.advance(circ, post_event_state(), H, events,
                       em.DiscontinuityPolicy("improved"),
                       em.make_taylor2, em.make_taylor2)

    def test_cda_dispatch(self):
        circ = em.build_fig1_circuit(1.0, 1.0, switch_closed=True)
        st0 = em.fig1_initial_state(circ, 0.06, 0.04)
        final, records = em.advance(circ, st0, H, [em.Event(0.0, "open_switch")],
                                    em.DiscontinuityPolicy("cda"),
                                    em.make_itm, em.make_taylor2)
        assert [r.reportable for r in records] == [False, True]
        assert final.t == H
