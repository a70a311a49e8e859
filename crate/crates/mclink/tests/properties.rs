//! Randomized invariants over the analytic layer. Everything here is cheap
//! (no PDE solves) so proptest can afford its default case counts.

use proptest::prelude::*;

use mclink::threshold;
use mclink::transmitter::SerpentineSpec;
use mclink::transport;
use mclink::types::{FlowEnv, GaussPulse, ReactionSpec, RectPulse, Source, TimeSeries};

fn env() -> FlowEnv {
    FlowEnv::new(0.002, 1e-9, 1e-8).unwrap()
}

proptest! {
    /// With k = 0 the reacting-channel solution collapses to plain
    /// convection-diffusion.
    #[test]
    fn zero_rate_reduces_to_convdiff(
        x in 1e-5f64..2e-3,
        t in 0.0f64..8.0,
        c0 in 0.1f64..5.0,
        t_on in 0.1f64..3.0,
        c_b0 in 0.0f64..4.0,
    ) {
        let env = env();
        let rect = RectPulse::new(c0, t_on, 0.0).unwrap();
        let rx = ReactionSpec::new(0.0, c_b0).unwrap();
        let a = transport::theorem1_reactant(x, t, &env, &rect, &rx);
        let b = transport::convdiff_rect(x, t, &env, &rect);
        prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-30), "a={a}, b={b}");
    }

    /// Reactant + product always reconstructs the inert profile (mass sum).
    #[test]
    fn reactant_plus_product_is_inert_profile(
        x in 1e-5f64..1.5e-3,
        t in 0.0f64..8.0,
        c0 in 0.1f64..5.0,
        t_on in 0.1f64..3.0,
        k in 1.0f64..500.0,
        c_b0 in 0.05f64..5.0,
    ) {
        let env = env();
        let rect = RectPulse::new(c0, t_on, 0.0).unwrap();
        let rx = ReactionSpec::new(k, c_b0).unwrap();
        let sum = transport::theorem1_reactant(x, t, &env, &rect, &rx)
            + transport::theorem1_product(x, t, &env, &rect, &rx);
        // The theorem works at the effective (surviving) amplitude
        // min{C_A0, C_B0}, so that is the inert profile it must sum to.
        let eff = transport::effective_c0(&rect, &rx);
        let eff_rect = RectPulse::new(eff, t_on, 0.0).unwrap();
        let h = transport::convdiff_rect(x, t, &env, &eff_rect);
        prop_assert!((sum - h).abs() <= 1e-10 * eff, "sum={sum}, h={h}");
    }

    /// Concentrations stay inside [0, C0] no matter the parameters.
    #[test]
    fn channel_solutions_are_bounded(
        x in 1e-5f64..2e-3,
        t in 0.0f64..10.0,
        c0 in 0.1f64..5.0,
        t_on in 0.1f64..3.0,
        k in 0.0f64..500.0,
        c_b0 in 0.0f64..5.0,
    ) {
        let env = env();
        let rect = RectPulse::new(c0, t_on, 0.0).unwrap();
        let rx = ReactionSpec::new(k, c_b0).unwrap();
        for v in [
            transport::theorem1_reactant(x, t, &env, &rect, &rx),
            transport::theorem1_product(x, t, &env, &rect, &rx),
            transport::convdiff_rect(x, t, &env, &rect),
        ] {
            prop_assert!(v >= -1e-12 && v <= c0 * (1.0 + 1e-12), "v={v}, c0={c0}");
        }
    }

    /// Nothing arrives before the injection starts.
    #[test]
    fn causality_before_onset(
        x in 1e-5f64..2e-3,
        c0 in 0.1f64..5.0,
        t_on in 0.1f64..3.0,
        t0 in 0.0f64..2.0,
        frac in 0.0f64..1.0,
    ) {
        let env = env();
        let rect = RectPulse::new(c0, t_on, t0).unwrap();
        let t = t0 * frac; // any time up to the onset
        let v = transport::convdiff_rect(x, t, &env, &rect);
        prop_assert!(v == 0.0, "v={v} at t={t} before onset {t0}");
    }

    /// Crossing times straddle the pulse centre symmetrically (up to a
    /// couple of ulps of 2mu — exact floating-point symmetry is not
    /// attainable) and sit exactly at the threshold level.
    #[test]
    fn crossing_times_symmetric(
        c0 in 0.5f64..20.0,
        mu in 0.2f64..10.0,
        sigma2 in 1e-3f64..4.0,
        level in 0.05f64..0.95,
    ) {
        let g = GaussPulse::new(c0, mu, sigma2).unwrap();
        let c_b0 = level * g.peak();
        let (t1, t2) = threshold::gauss_crossing_times(&g, c_b0).unwrap();
        prop_assert!(t1 < mu && mu < t2);
        // Symmetry holds to rounding; the roundoff scale is set by the
        // crossing half-width, which can dwarf mu itself.
        let target = 2.0 * mu;
        let scale = t1.abs().max(t2.abs()).max(target);
        prop_assert!(
            ((t1 + t2) - target).abs() <= 2.0 * f64::EPSILON * scale,
            "t1+t2={}, 2mu={target}", t1 + t2
        );
        // The pulse really crosses the threshold there.
        prop_assert!((g.eval(t1) - c_b0).abs() <= 1e-9 * c_b0.max(1e-30));
        prop_assert!((g.eval(t2) - c_b0).abs() <= 1e-9 * c_b0.max(1e-30));
    }

    /// The clipped approximation is bounded by the residual peak and is
    /// identically zero when the threshold exceeds the pulse peak.
    #[test]
    fn appro1_bounded_by_residual_peak(
        x in 1e-5f64..1.5e-3,
        t in 0.0f64..12.0,
        c0 in 0.5f64..10.0,
        mu in 0.5f64..5.0,
        sigma2 in 0.01f64..1.0,
        level in 0.05f64..1.5,
    ) {
        let env = env();
        let g = GaussPulse::new(c0, mu, sigma2).unwrap();
        let c_b0 = level * g.peak();
        let v = threshold::theorem2_appro1(x, t, &env, &g, c_b0);
        if level >= 1.0 {
            prop_assert!(v == 0.0, "over-threshold must clip to zero, got {v}");
        } else {
            prop_assert!(v >= 0.0 && v <= (g.peak() - c_b0) * (1.0 + 1e-9), "v={v}");
        }
    }

    /// Rectangular window semantics: on inside (t0, t0+t_on], off outside.
    #[test]
    fn rect_pulse_window(
        c0 in 0.1f64..5.0,
        t_on in 0.1f64..3.0,
        t0 in 0.0f64..2.0,
        t in -1.0f64..6.0,
    ) {
        let r = RectPulse::new(c0, t_on, t0).unwrap();
        let v = r.eval(t);
        if t > t0 && t <= t0 + t_on {
            prop_assert!(v == c0);
        } else {
            prop_assert!(v == 0.0);
        }
    }

    /// Serpentine bookkeeping: the equivalent length grows with every
    /// geometric component and is always at least the straight part.
    #[test]
    fn serpentine_length_monotone(
        l21 in 1e-5f64..1e-3,
        l22 in 1e-5f64..1e-3,
        l23 in 1e-5f64..1e-3,
        ls in 1e-5f64..5e-4,
        hs in 1e-5f64..5e-4,
        delay_lines in 0u32..3,
    ) {
        let base = SerpentineSpec { l21, l22, l23, ls, hs, delay_lines };
        let len = base.equivalent_length().unwrap();
        let straight = l21 + l22 + l23;
        prop_assert!(len >= straight - 1e-18);
        if delay_lines > 0 {
            let taller = SerpentineSpec { hs: hs * 1.5, ..base };
            prop_assert!(taller.equivalent_length().unwrap() > len);
        }
    }

    /// Linear interpolation stays inside the sampled envelope and vanishes
    /// outside the support.
    #[test]
    fn interp_within_envelope(
        values in proptest::collection::vec(0.0f64..5.0, 4..40),
        frac in 0.0f64..1.0,
    ) {
        let n = values.len();
        let dt = 0.01;
        let ts = TimeSeries::new(
            (0..n).map(|i| i as f64 * dt).collect(),
            values.clone(),
            0.0,
            Source::Analytical,
        ).unwrap();
        let t = frac * (n - 1) as f64 * dt;
        let v = ts.interp(t);
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(0.0f64, f64::max);
        prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        prop_assert!(ts.interp(-1.0) == 0.0 && ts.interp((n as f64) * dt + 1.0) == 0.0);
    }
}
