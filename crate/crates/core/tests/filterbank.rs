use std::f64::consts::PI;

use proptest::prelude::*;
use sraf::filterbank::{
    analyze, design_prototype, format_coefficients, frame, modulate, read_coefficients,
    write_coefficients, AnalysisBank, FrameCursor, PrototypeFilter, SubbandAnalyzer,
};
use sraf::Error;

fn dtft_mag(h: &[f64], w: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (n, &c) in h.iter().enumerate() {
        re += c * (w * n as f64).cos();
        im -= c * (w * n as f64).sin();
    }
    (re * re + im * im).sqrt()
}

fn reference_bank() -> AnalysisBank {
    modulate(&design_prototype(4, 32, 60.0).unwrap())
}

#[test]
fn attenuation_matches_direct_dtft() {
    let proto = design_prototype(4, 32, 60.0).unwrap();
    let p = proto.coefficients();
    let edge = proto.stopband_edge();
    assert!((edge - 1.1 * PI / 4.0).abs() < 1e-15);

    // Dense grid: the reported figure can only be optimistic by grid error.
    let points = 32_768;
    let dc = dtft_mag(p, 0.0);
    let peak = (0..points)
        .map(|g| PI * g as f64 / (points - 1) as f64)
        .filter(|&w| w >= edge)
        .map(|w| dtft_mag(p, w))
        .fold(0.0f64, f64::max);
    let oracle = -20.0 * (peak / dc).log10();
    assert!(oracle >= 55.0, "dense-grid attenuation {oracle}");
    assert!((proto.stopband_attenuation_db() - oracle).abs() < 0.5);
}

#[test]
fn prototype_has_unit_dc_gain_and_symmetry() {
    for (n, l) in [(2, 16), (4, 32), (4, 64), (8, 64)] {
        let proto = design_prototype(n, l, 40.0).unwrap();
        let p = proto.coefficients();
        let dc: f64 = p.iter().sum();
        assert!((dc - 1.0).abs() < 1e-12, "N={n} L={l} dc={dc}");
        for i in 0..l {
            assert_eq!(p[i], p[l - 1 - i]);
        }
    }
}

#[test]
fn modulation_matches_closed_form() {
    let proto = design_prototype(4, 32, 60.0).unwrap();
    let p = proto.coefficients();
    let bank = modulate(&proto);
    let (n, l) = (4.0, 32.0);
    for (i, h) in bank.filters().iter().enumerate() {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        for (t, &v) in h.iter().enumerate() {
            let phase =
                (PI / n) * (i as f64 + 0.5) * (t as f64 - (l - 1.0) / 2.0) + sign * PI / 4.0;
            let expect = 2.0 * p[t] * phase.cos();
            assert!((v - expect).abs() < 1e-14);
        }
    }
}

#[test]
fn each_subband_peaks_inside_its_band() {
    let bank = reference_bank();
    let n = bank.subbands();
    for (i, h) in bank.filters().iter().enumerate() {
        let (best, _) = (0..2048)
            .map(|g| PI * g as f64 / 2047.0)
            .map(|w| (w, dtft_mag(h, w)))
            .fold((0.0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        let lo = i as f64 * PI / n as f64;
        let hi = (i + 1) as f64 * PI / n as f64;
        assert!(best >= lo && best <= hi, "band {i} peaks at {best}");
    }
    assert!(bank.power_complementarity_ripple_db() <= 1.0);
}

#[test]
fn analyze_matches_direct_convolution() {
    let bank = reference_bank();
    let x: Vec<f64> = (0..300)
        .map(|t| ((t * 37 % 101) as f64 - 50.0) / 17.0)
        .collect();
    let out = analyze(&bank, &x);
    for (h, y) in bank.filters().iter().zip(&out) {
        assert_eq!(y.len(), x.len());
        for t in 0..x.len() {
            let direct: f64 = (0..h.len())
                .filter(|&j| j <= t)
                .map(|j| h[j] * x[t - j])
                .sum();
            assert!((y[t] - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }
}

#[test]
fn invalid_sizes_and_unreachable_targets() {
    assert!(matches!(
        design_prototype(4, 30, 60.0),
        Err(Error::Parameter(_))
    ));
    assert!(matches!(
        design_prototype(1, 32, 60.0),
        Err(Error::Parameter(_))
    ));
    match design_prototype(4, 8, 80.0) {
        Err(Error::Design {
            best_db, target_db, ..
        }) => {
            assert_eq!(target_db, 80.0);
            assert!(best_db < 80.0);
        }
        other => panic!("expected a design error, got {other:?}"),
    }
    assert!(PrototypeFilter::new(vec![1.0, 2.0, 3.0, 4.0], 2).is_err());
}

#[test]
fn frames_follow_decimated_time() {
    let u: Vec<Vec<f64>> = (0..2)
        .map(|i| (0..20).map(|t| (10 * i + t) as f64).collect())
        .collect();
    let d: Vec<Vec<f64>> = (0..2)
        .map(|i| (0..20).map(|t| -((10 * i + t) as f64)).collect())
        .collect();
    let f = frame(&u, &d, 3, 4).unwrap();
    assert_eq!(f.regressor(0), &[6.0, 5.0, 4.0, 3.0]);
    assert_eq!(f.regressor(1), &[16.0, 15.0, 14.0, 13.0]);
    assert_eq!(f.desired(), &[-6.0, -16.0]);
    assert_eq!(f.energies()[0], 36.0 + 25.0 + 16.0 + 9.0);
    assert!(frame(&u, &d, 10, 4).is_err());

    let mut cursor = FrameCursor::new(&u, &d, 4).unwrap();
    assert_eq!(cursor.blocks(), 10);
    let mut k = 0;
    while let Some(c) = cursor.advance() {
        assert_eq!(c, &frame(&u, &d, k, 4).unwrap());
        k += 1;
    }
    assert_eq!(k, 10);
}

proptest! {
    #[test]
    fn streaming_matches_one_shot(
        x in prop::collection::vec(-10.0f64..10.0, 1..400),
        cuts in prop::collection::vec(0usize..400, 0..6),
    ) {
        let bank = reference_bank();
        let whole = analyze(&bank, &x);
        let mut bounds: Vec<usize> = cuts.into_iter().map(|c| c % (x.len() + 1)).collect();
        bounds.push(0);
        bounds.push(x.len());
        bounds.sort_unstable();
        let mut analyzer = SubbandAnalyzer::new(bank);
        let mut joined = vec![Vec::new(); 4];
        for w in bounds.windows(2) {
            for (j, part) in joined.iter_mut().zip(analyzer.process(&x[w[0]..w[1]])) {
                j.extend(part);
            }
        }
        prop_assert_eq!(joined, whole);
    }

    #[test]
    fn analysis_is_linear(
        a in prop::collection::vec(-1.0f64..1.0, 64),
        b in prop::collection::vec(-1.0f64..1.0, 64),
        s in -3.0f64..3.0,
    ) {
        let bank = reference_bank();
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + s * y).collect();
        let (ya, yb, ym) = (analyze(&bank, &a), analyze(&bank, &b), analyze(&bank, &mix));
        for i in 0..4 {
            for t in 0..64 {
                prop_assert!((ym[i][t] - ya[i][t] - s * yb[i][t]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn coefficient_text_round_trips(half in prop::collection::vec(-1.0f64..1.0, 8)) {
        let mut c = half.clone();
        c.extend(half.iter().rev());
        let proto = PrototypeFilter::new(c, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("proto.txt");
        write_coefficients(&path, &proto).unwrap();
        prop_assert!(format_coefficients(&proto).starts_with("# prototype N=4 L=16"));
        prop_assert_eq!(read_coefficients(&path).unwrap(), proto);
    }
}
