//! Independent reference computations: all-pairs correlators, a
//! brute-force Riemann sum for HOM, and Kolmogorov–Smirnov checks of the
//! samplers.

use plasmon_core::correlator::{
    auto_g2_zero, cauchy_schwarz, coincidence_histogram, coincidence_histogram_segmented, coincidence_histogram_with,
    heralded_g2_zero, normalize, reconstruct_waveform, Binning,
};
use plasmon_core::hom::{hom_coincidence, hom_visibility, mhz_to_rad_per_ns};
use plasmon_core::model::{sample_delays, BiphotonAmplitude, Shape, TimeTag, TimeTagStream};
use plasmon_core::optics::{derive_modulation_for_target, ModulationFunction, TimeGrid};
use plasmon_core::rng::RngSpec;
use plasmon_core::source::{generate_pairs, EventKind, SourceConfig};
use rand::Rng;

fn random_stream(seed: u64, n: usize, span: u64, channels: u8) -> TimeTagStream {
    let mut r = RngSpec::new(seed, 99).rng();
    let tags = (0..n).map(|_| TimeTag::new(r.gen_range(0..=span), r.gen_range(0..channels))).collect();
    TimeTagStream::from_unsorted(tags, span)
}

/// All-pairs histogram: every (i, j), i ≠ j, with tag i in `a` and tag j
/// in `b`, binned by t_j − t_i.
fn brute_histogram(s: &TimeTagStream, a: &[u8], b: &[u8], bin: Binning) -> Vec<u64> {
    let tags = s.tags();
    let mut counts = vec![0u64; bin.len()];
    for (i, x) in tags.iter().enumerate() {
        if !a.contains(&x.channel) {
            continue;
        }
        for (j, y) in tags.iter().enumerate() {
            if i == j || !b.contains(&y.channel) {
                continue;
            }
            let d = y.time as i64 - x.time as i64;
            if d >= bin.tau_min && d < bin.tau_max {
                counts[((d - bin.tau_min) / bin.bin_width as i64) as usize] += 1;
            }
        }
    }
    counts
}

const CHANNEL_SETS: [(&[u8], &[u8]); 5] = [(&[0], &[1]), (&[0, 3], &[1, 2]), (&[1], &[1]), (&[0, 1], &[1, 2]), (&[2], &[0])];

#[test]
fn histogram_equals_all_pairs_oracle() {
    for seed in 0..20u64 {
        let s = random_stream(seed, 200 + 40 * seed as usize, 200_000, 4);
        for bin in [Binning::new(1_000, -20_000, 20_000).unwrap(), Binning::new(7, -7_000, 14_000).unwrap(), Binning::symmetric(2_500, 9_000).unwrap()] {
            for (a, b) in CHANNEL_SETS {
                let want = brute_histogram(&s, a, b, bin);
                let h = coincidence_histogram_with(&s, a, b, bin, false);
                assert_eq!(h.counts, want, "seed {seed} {a:?} {b:?} {bin:?}");
                assert_eq!(coincidence_histogram_with(&s, a, b, bin, true).counts, want);
                for n in [1, 3, 8] {
                    assert_eq!(coincidence_histogram_segmented(&s, a, b, bin, n), h, "segments {n}");
                }
                let singles = |set: &[u8]| s.tags().iter().filter(|t| set.contains(&t.channel)).count() as u64;
                assert_eq!(h.singles, (singles(a), singles(b)));
            }
        }
    }
}

#[test]
fn parallel_sweep_equals_sequential_on_large_stream() {
    let s = random_stream(5, 120_000, 2_000_000_000, 4);
    let bin = Binning::symmetric(1_000, 100_000).unwrap();
    for (a, b) in CHANNEL_SETS {
        assert_eq!(coincidence_histogram_with(&s, a, b, bin, true), coincidence_histogram_with(&s, a, b, bin, false));
    }
}

#[test]
fn heralded_g2_equals_oracle() {
    for seed in 0..30u64 {
        let s = random_stream(seed, 1_000, 3_000_000, 4);
        let window = -40_000..60_000;
        let tags = s.tags();
        let has = |t: u64, ch: u8| {
            tags.iter().any(|y| y.channel == ch && (y.time as i64 - t as i64) >= window.start && (y.time as i64 - t as i64) < window.end)
        };
        let (mut n1, mut n12, mut n13, mut n123) = (0u64, 0u64, 0u64, 0u64);
        for h in tags.iter().filter(|t| t.channel == 0 || t.channel == 3) {
            n1 += 1;
            let (x, y) = (has(h.time, 1), has(h.time, 2));
            n12 += x as u64;
            n13 += y as u64;
            n123 += (x && y) as u64;
        }
        let g = heralded_g2_zero(&s, &[0, 3], 1, 2, window.clone()).unwrap();
        assert_eq!((g.n1, g.n12, g.n13, g.n123), (n1, n12, n13, n123), "seed {seed}");
        let want = n123 as f64 * n1 as f64 / (n12 as f64 * n13 as f64);
        assert!((g.value - want).abs() <= 1e-14 * want.max(1.0));
    }
}

#[test]
fn auto_correlation_and_cauchy_schwarz_equal_oracle() {
    for seed in 0..10u64 {
        let s = random_stream(seed, 800, 1_000_000, 4);
        let w = 40_000u64;
        let auto_bin = Binning { bin_width: w, tau_min: -(w as i64 / 2), tau_max: w as i64 - w as i64 / 2 };
        let auto = |a: u8, b: u8| {
            let n = brute_histogram(&s, &[a], &[b], auto_bin)[0];
            let acc = s.count(a) as f64 * s.count(b) as f64 * w as f64 / s.duration() as f64;
            (n, n as f64 / acc)
        };
        let e = auto_g2_zero(&s, 1, 2, w).unwrap();
        let (n, v) = auto(1, 2);
        assert_eq!(e.counts, n);
        assert!((e.value - v).abs() <= 1e-14 * v.max(1.0));

        let bin = Binning::symmetric(5_000, 50_000).unwrap();
        let r = cauchy_schwarz(&s, &[0, 3], [1, 2], bin, w).unwrap();
        let cross = brute_histogram(&s, &[0, 3], &[1, 2], bin);
        assert_eq!(r.cross.counts, cross);
        let acc = (s.count(0) + s.count(3)) as f64 * (s.count(1) + s.count(2)) as f64 * 5_000.0 / s.duration() as f64;
        let (_, gii) = auto(0, 3);
        let (_, grr) = auto(1, 2);
        for (k, c) in r.c.iter().enumerate() {
            let g = cross[k] as f64 / acc;
            let want = g * g / (gii * grr);
            let got = c.unwrap();
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "seed {seed} bin {k}: {got} vs {want}");
        }
    }
}

#[test]
fn waveform_and_normalization_equal_oracle() {
    let s = random_stream(77, 1_000, 500_000, 4);
    let bin = Binning::symmetric(2_000, 30_000).unwrap();
    let want = brute_histogram(&s, &[0, 3], &[1, 2], bin);
    let w = reconstruct_waveform(&s, &[0, 3], &[1, 2], bin).unwrap();
    assert_eq!(w.counts().iter().map(|&c| c as u64).collect::<Vec<_>>(), want);
    let g = normalize(&coincidence_histogram(&s, &[0], &[2], bin)).unwrap();
    let acc = s.count(0) as f64 * s.count(2) as f64 * 2_000.0 / 500_000.0;
    for (k, n) in brute_histogram(&s, &[0], &[2], bin).iter().enumerate() {
        let want = *n as f64 / acc;
        assert!((g.g[k] - want).abs() <= 1e-14 * want.max(1.0));
    }
}

/// P_c = ½(1 − ∫ψ(τ+δ)ψ(δ−τ)cos(Δτ)dτ) by a midpoint sum with a step far
/// below the oscillation period and the waveform scale.
fn riemann_pc(amp: &BiphotonAmplitude<f64>, mhz: f64, delay: f64) -> f64 {
    let omega = 2.0 * std::f64::consts::PI * mhz * 1e-3;
    let reach = 60.0 * amp.fwhm() + delay.abs();
    let h = 2e-3;
    let n = (2.0 * reach / h) as i64;
    let mut sum = 0.0;
    for k in 0..n {
        let tau = -reach + (k as f64 + 0.5) * h;
        sum += amp.amplitude(tau + delay) * amp.amplitude(delay - tau) * (omega * tau).cos();
    }
    0.5 * (1.0 - sum * h)
}

#[test]
fn hom_matches_riemann_sum() {
    let amp = BiphotonAmplitude::new(Shape::DoubleExponential, 50.0, 0.0).unwrap();
    for delay in [8.0, 42.5] {
        for mhz in [0.0, 1.0, 2.25, 4.5, 9.0, 15.0] {
            let got = hom_coincidence(&amp, mhz_to_rad_per_ns(mhz), delay).unwrap();
            let want = riemann_pc(&amp, mhz, delay);
            assert!((got - want).abs() < 1e-6, "δ={delay} Δ={mhz}: {got} vs {want}");
        }
        let v = hom_visibility(&amp, delay).unwrap();
        assert!((v - (1.0 - 2.0 * riemann_pc(&amp, 0.0, delay))).abs() < 1e-6);
    }
}

/// Kolmogorov–Smirnov distance between a sample and a CDF.
fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic critical distance at significance 0.01.
fn ks_critical(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

#[test]
fn delay_sampling_passes_ks() {
    for (k, shape) in Shape::ALL.into_iter().enumerate() {
        for (fwhm, offset) in [(50.0, 0.0), (40.0, 12.0)] {
            let amp = BiphotonAmplitude::new(shape, fwhm, offset).unwrap();
            let n = 100_000;
            let xs = sample_delays(&amp, RngSpec::new(11, k as u64), n);
            let d = ks_distance(xs, |x| amp.cdf(x));
            assert!(d < ks_critical(n), "{shape} fwhm {fwhm}: D = {d}");
        }
    }
}

#[test]
fn sampled_double_exponential_width() {
    let amp = BiphotonAmplitude::new(Shape::DoubleExponential, 50.0, 0.0).unwrap();
    let mut xs = sample_delays(&amp, RngSpec::new(3, 0), 100_000);
    xs.sort_by(f64::total_cmp);
    // For the Laplace law the FWHM is 2 ln2 τ₀ and the median |x| is ln2 τ₀,
    // so the FWHM estimate is twice the median absolute delay.
    let mut abs: Vec<f64> = xs.iter().map(|x| x.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let fwhm = 2.0 * abs[abs.len() / 2];
    assert!((47.0..=53.0).contains(&fwhm), "{fwhm}");
    let g = BiphotonAmplitude::new(Shape::Gaussian, 40.0, 3.0).unwrap();
    let ys = sample_delays(&g, RngSpec::new(4, 0), 100_000);
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let sigma = 40.0 / (8.0 * 2f64.ln()).sqrt();
    assert!((mean - 3.0).abs() < 5.0 * sigma / (ys.len() as f64).sqrt(), "{mean}");
}

#[test]
fn idler_interarrival_is_exponential() {
    let cfg = SourceConfig::default();
    let events = generate_pairs(&cfg, 200 * 1_000_000_000_000, RngSpec::new(8, 0)).unwrap();
    let idlers: Vec<i64> = events.iter().filter(|e| e.kind == EventKind::TruePair).filter_map(|e| e.idler_time).collect();
    let gaps: Vec<f64> = idlers.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
    let mean = 1e12 / cfg.pair_rate;
    let d = ks_distance(gaps.clone(), |x| 1.0 - (-x / mean).exp());
    assert!(d < ks_critical(gaps.len()), "D = {d}");
    let delays: Vec<f64> = events.iter().filter(|e| e.kind == EventKind::TruePair).filter_map(|e| e.delay_ns()).collect();
    // Signal times are rounded to 1 ps; far below the KS resolution here.
    let dk = ks_distance(delays.clone(), |x| cfg.amplitude.cdf(x));
    assert!(dk < ks_critical(delays.len()), "delay D = {dk}");
}

#[test]
fn derived_gaussian_modulation_matches_ratio_oracle() {
    let input = BiphotonAmplitude::new(Shape::DoubleExponential, 50.0, 0.0).unwrap();
    let target = BiphotonAmplitude::new(Shape::Gaussian, 40.0, 0.0).unwrap();
    let grid = TimeGrid::new(-150.0, 0.5, 601).unwrap();
    let d = derive_modulation_for_target(&input, &target, grid, None).unwrap();
    let ModulationFunction::Tabulated { values, .. } = &d.function else { panic!("tabulated expected") };
    // Closed-form ratio: Gaussian / Laplace densities.
    let tau0 = 25.0 / 2f64.ln();
    let sigma = 40.0 / (8.0 * 2f64.ln()).sqrt();
    let ratio = |t: f64| {
        let g = (-t * t / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let l = (-t.abs() / tau0).exp() / (2.0 * tau0);
        g / l
    };
    let max = (0..601).map(|k| ratio(-150.0 + 0.5 * k as f64)).fold(0.0, f64::max);
    for (k, m) in values.iter().enumerate() {
        let t = -150.0 + 0.5 * k as f64;
        let want = (ratio(t) / max).sqrt();
        assert!((m - want).abs() < 1e-9, "t = {t}: {m} vs {want}");
    }
}
