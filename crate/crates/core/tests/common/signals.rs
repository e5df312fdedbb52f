//! Deterministic test signals. Must stay in sync with tests/golden/generate.py.

use std::f64::consts::PI;

pub const SR: f64 = 16000.0;
pub const N: usize = 80_000;

fn splitmix(seed: u64, n: usize) -> Vec<f64> {
    let mut state = seed;
    (0..n)
        .map(|_| {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect()
}

fn t(i: usize) -> f64 {
    i as f64 / SR
}

fn sine(f: f64, a: f64) -> Vec<f64> {
    (0..N).map(|i| a * (2.0 * PI * f * t(i)).sin()).collect()
}

fn chirp(f0: f64, f1: f64, a: f64) -> Vec<f64> {
    let dur = N as f64 / SR;
    (0..N)
        .map(|i| {
            let tt = t(i);
            a * (2.0 * PI * (f0 * tt + (f1 - f0) * tt * tt / (2.0 * dur))).sin()
        })
        .collect()
}

pub fn all() -> Vec<(&'static str, Vec<f64>)> {
    let mut out = vec![
        ("silence", vec![0.0; N]),
        ("sine_440_unit", sine(440.0, 1.0)),
        ("sine_100", sine(100.0, 0.5)),
        ("sine_1000", sine(1000.0, 0.5)),
        ("sine_3000", sine(3000.0, 0.5)),
        ("sine_7000", sine(7000.0, 0.5)),
        ("sine_quiet", sine(250.0, 1e-3)),
        ("chirp_100_4000", chirp(100.0, 4000.0, 0.5)),
        ("chirp_50_7900", chirp(50.0, 7900.0, 0.5)),
        ("chirp_down_6000_200", chirp(6000.0, 200.0, 0.8)),
        ("noise_white", splitmix(1, N).into_iter().map(|v| 0.3 * v).collect()),
    ];
    let bursts: Vec<f64> = splitmix(2, N)
        .into_iter()
        .enumerate()
        .map(|(i, v)| if (i / 8000) % 2 == 0 { 0.5 * v } else { 0.0 })
        .collect();
    out.push(("noise_bursts", bursts));
    out.push(("noise_low", splitmix(3, N).into_iter().map(|v| 0.01 * v).collect()));
    let mut short = vec![0.0; N];
    for (s, v) in short.iter_mut().zip(splitmix(4, 12000)) {
        *s = 0.4 * v;
    }
    out.push(("noise_short_burst", short));
    let harm: Vec<f64> = (0..N)
        .map(|i| (1..9).map(|h| (0.6 / h as f64) * (2.0 * PI * 150.0 * h as f64 * t(i)).sin()).sum())
        .collect();
    out.push(("harmonics_150", harm));
    let am: Vec<f64> = sine(800.0, 0.7)
        .into_iter()
        .enumerate()
        .map(|(i, v)| (0.5 + 0.5 * (2.0 * PI * 4.0 * t(i)).sin()) * v)
        .collect();
    out.push(("am_tone", am));
    let mut half = sine(600.0, 0.5);
    half[N / 2..].iter_mut().for_each(|v| *v = 0.0);
    out.push(("sine_then_silence", half));
    let imp: Vec<f64> = (0..N).map(|i| if i % 160 == 0 { 0.9 } else { 0.0 }).collect();
    out.push(("impulse_train", imp));
    let sq: Vec<f64> = (0..N)
        .map(|i| {
            (1..20)
                .step_by(2)
                .map(|k| (0.8 / k as f64) * (2.0 * PI * 220.0 * k as f64 * t(i)).sin())
                .sum()
        })
        .collect();
    out.push(("odd_harmonics_220", sq));
    out.push(("sine_plus_dc", sine(330.0, 0.25).into_iter().map(|v| 0.25 + v).collect()));
    out
}
