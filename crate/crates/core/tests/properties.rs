use num_complex::Complex64;
use proptest::prelude::*;

use soilradar::capture;
use soilradar::dsp::{
    detect_tag, doppler_bin_for_freq, extract_tag_vector, range_doppler, DetectOptions,
    MirrorCombine,
};
use soilradar::moisture::{ka_from_delta_tof, KaMode};
use soilradar::radar::{
    frame_rng, synthesize_capture, synthesize_frame, Modulation, PulseShape, RadarConfig, Reflector,
};
use soilradar::soil::{
    one_way_tof, profile_effective_ka, topp_vwc, vwc_to_ka, SoilLayer, SoilProfile, SoilTexture,
    SPEED_OF_LIGHT,
};

fn quiet() -> RadarConfig {
    RadarConfig {
        noise_sigma: 0.0,
        ..RadarConfig::default()
    }
}

fn texture(i: usize) -> SoilTexture {
    match i % 4 {
        0 => SoilTexture::sandy_clay_loam(),
        1 => SoilTexture::silt_loam(),
        2 => SoilTexture::clay_loam(),
        _ => SoilTexture::potting_soil(),
    }
}

fn square(freq: f64, phase: f64) -> Modulation {
    Modulation::OnOffSquare {
        freq,
        duty: 0.5,
        phase,
    }
}

fn arb_reflector() -> impl Strategy<Value = Reflector> {
    (0.3f64..3.5, 0.01f64..2.0, 0.0f64..std::f64::consts::TAU)
        .prop_map(|(d, a, p)| Reflector::fixed(d, Complex64::from_polar(a, p)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frames_superpose(
        a in prop::collection::vec(arb_reflector(), 1..6),
        b in prop::collection::vec(arb_reflector(), 1..6),
        m in 0usize..400,
    ) {
        let c = quiet();
        let pulse = PulseShape::gaussian_for(&c);
        let mut both = a.clone();
        both.extend(&b);
        let fa = synthesize_frame(&c, &pulse, &a, m, &mut frame_rng(0, m)).unwrap();
        let fb = synthesize_frame(&c, &pulse, &b, m, &mut frame_rng(0, m)).unwrap();
        let fab = synthesize_frame(&c, &pulse, &both, m, &mut frame_rng(0, m)).unwrap();
        for i in 0..fab.len() {
            prop_assert!((fab[i] - fa[i] - fb[i]).norm() <= 1e-12);
        }
    }

    #[test]
    fn topp_round_trip(theta in 0.0f64..0.40, t in 0usize..4) {
        let tex = texture(t);
        let ka = vwc_to_ka(theta, &tex).unwrap();
        prop_assert!((1.0..=81.0).contains(&ka));
        prop_assert!((topp_vwc(ka).unwrap() - theta).abs() < 1e-9);
    }

    #[test]
    fn ka_and_tof_increase_with_moisture(t1 in 0.01f64..0.39, dt in 0.001f64..0.01, t in 0usize..3) {
        let tex = texture(t);
        let (k1, k2) = (vwc_to_ka(t1, &tex).unwrap(), vwc_to_ka(t1 + dt, &tex).unwrap());
        prop_assert!(k2 > k1);
        prop_assert!(one_way_tof(0.3, k2).unwrap() > one_way_tof(0.3, k1).unwrap());
        prop_assert!(tex.conductivity(t1 + dt) > tex.conductivity(t1));
    }

    #[test]
    fn layer_order_does_not_change_full_depth_average(
        layers in prop::collection::vec((0.05f64..0.4, 0.0f64..0.40, 0usize..3), 1..5),
    ) {
        let built: Vec<SoilLayer> = layers.iter().map(|&(h, th, t)| SoilLayer::new(h, th, texture(t))).collect();
        let mut reversed = built.clone();
        reversed.reverse();
        let depth: f64 = layers.iter().map(|l| l.0).sum();
        let fwd = profile_effective_ka(&SoilProfile::new(built.clone()).unwrap(), depth).unwrap();
        let rev = profile_effective_ka(&SoilProfile::new(reversed).unwrap(), depth).unwrap();
        prop_assert!(((fwd - rev) / fwd).abs() < 1e-12);

        // travel time through the stack equals travel time through Ka_eff
        let stack: f64 = built.iter().map(|l| one_way_tof(l.thickness, l.ka().unwrap()).unwrap()).sum();
        let uniform = one_way_tof(depth, fwd).unwrap();
        prop_assert!(((stack - uniform) / stack).abs() < 1e-12);
    }

    #[test]
    fn approximate_inversion_converges_with_ka(k1 in 1.5f64..79.0, dk in 0.5f64..20.0, d in 0.05f64..1.0) {
        let k2 = (k1 + dk).min(81.0);
        let gap = |ka: f64| {
            let delta = d * (ka.sqrt() - 1.0) / SPEED_OF_LIGHT;
            let exact = ka_from_delta_tof(delta, d, KaMode::Exact, 0.05).unwrap().ka;
            let approx = ka_from_delta_tof(delta, d, KaMode::PaperApprox, 0.05).unwrap().ka;
            assert!((exact - ka).abs() < 1e-9 * ka);
            (exact - approx) / exact
        };
        prop_assert!(gap(k1) > gap(k2));
        prop_assert!(gap(k2) > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn static_reflectors_leave_tag_vector_unchanged(
        clutter in prop::collection::vec(arb_reflector(), 1..60),
        tag_d in 0.5f64..3.3,
    ) {
        let c = quiet();
        let pulse = PulseShape::gaussian_for(&c);
        let tag = Reflector { distance: tag_d, amplitude: Complex64::new(0.3, 0.0), modulation: square(80.0, 0.2) };
        let vector = |scene: &[Reflector]| {
            let cap = synthesize_capture(&c, &pulse, scene, 2.0, 9).unwrap();
            extract_tag_vector(&range_doppler(&cap).unwrap(), 80.0, MirrorCombine::None).unwrap()
        };
        let base = vector(&[tag]);
        let mut scene = clutter.clone();
        scene.push(tag);
        let with = vector(&scene);
        let scale = base.iter().copied().fold(0.0, f64::max);
        for (a, b) in with.iter().zip(&base) {
            prop_assert!((a - b).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn square_wave_third_harmonic_is_a_third(phase in 0.05f64..6.2) {
        let c = RadarConfig { frame_rate: 1000.0, ..quiet() };
        let pulse = PulseShape::gaussian_for(&c);
        let d = c.distance_of_bin(20);
        let r = Reflector { distance: d, amplitude: Complex64::new(1.0, 0.0), modulation: square(212.0, phase) };
        let cap = synthesize_capture(&c, &pulse, &[r], 1.0, 0).unwrap();
        prop_assert_eq!(cap.frames, 1000);
        let img = range_doppler(&cap).unwrap();
        let spec = img.spectrum(20);
        let ratio = spec[212].norm() / spec[636].norm();
        prop_assert!((ratio - 3.0).abs() < 0.1, "ratio {}", ratio);
    }

    #[test]
    fn tags_at_different_frequencies_separate(n1 in 5usize..30, gap in 6usize..30) {
        let c = RadarConfig { noise_sigma: 0.005, ..RadarConfig::default() };
        let pulse = PulseShape::gaussian_for(&c);
        let n2 = n1 + gap;
        let tags = [
            Reflector { distance: c.distance_of_bin(n1), amplitude: Complex64::new(0.5, 0.0), modulation: square(80.0, 0.1) },
            Reflector { distance: c.distance_of_bin(n2), amplitude: Complex64::new(0.5, 0.0), modulation: square(50.0, 0.1) },
        ];
        let cap = synthesize_capture(&c, &pulse, &tags, 2.0, n1 as u64).unwrap();
        let img = range_doppler(&cap).unwrap();
        let opts = DetectOptions::default();
        let a = detect_tag(&img, 80.0, &opts).unwrap();
        let b = detect_tag(&img, 50.0, &opts).unwrap();
        prop_assert!(a.detected && b.detected);
        prop_assert_eq!(a.range_bin, n1);
        prop_assert_eq!(b.range_bin, n2);
        prop_assert_eq!(a.doppler_bin, doppler_bin_for_freq(80.0, 200.0, 400).unwrap());
    }

    #[test]
    fn capture_file_round_trip(seed in any::<u64>(), secs in 0.05f64..0.5) {
        let c = RadarConfig::default();
        let pulse = PulseShape::gaussian_for(&c);
        let scene = [Reflector::fixed(1.3, Complex64::new(0.4, -0.2))];
        let mut cap = synthesize_capture(&c, &pulse, &scene, secs, seed).unwrap();
        cap.annotations.insert("note".into(), "x".into());
        let back = capture::decode(&capture::encode(&cap).unwrap()).unwrap();
        prop_assert_eq!(back.frames, cap.frames);
        prop_assert_eq!(back.seed, seed);
        prop_assert_eq!(&back.annotations, &cap.annotations);
        for (a, b) in back.samples.iter().zip(&cap.samples) {
            prop_assert_eq!(a.re, b.re as f32 as f64);
            prop_assert_eq!(a.im, b.im as f32 as f64);
        }
    }
}

#[test]
fn same_seed_same_capture() {
    let c = RadarConfig::default();
    let pulse = PulseShape::gaussian_for(&c);
    let scene = [Reflector {
        distance: 1.5,
        amplitude: Complex64::new(0.2, 0.0),
        modulation: square(80.0, 0.0),
    }];
    let a = synthesize_capture(&c, &pulse, &scene, 1.0, 5).unwrap();
    let b = synthesize_capture(&c, &pulse, &scene, 1.0, 5).unwrap();
    let other = synthesize_capture(&c, &pulse, &scene, 1.0, 6).unwrap();
    assert_eq!(a.samples, b.samples);
    assert_ne!(a.samples, other.samples);
}

#[test]
fn noise_power_matches_sigma() {
    let c = RadarConfig {
        noise_sigma: 0.02,
        ..RadarConfig::default()
    };
    let cap = synthesize_capture(&c, &PulseShape::gaussian_for(&c), &[], 5.0, 1).unwrap();
    let power = cap.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() / cap.samples.len() as f64;
    assert!((power / 0.02f64.powi(2) - 1.0).abs() < 0.02, "{power}");
}
