//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

pub mod grids;

use std::collections::BTreeMap;

use serde::Deserialize;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// 15-point Kronrod estimate and its distance from the embedded 7-point Gauss rule.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let pair = f(c - h * XGK[j]) + f(c + h * XGK[j]);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod integration to relative tolerance `rtol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rtol: f64) -> f64 {
    let mut done = 0.0;
    let mut stack = vec![(a, b, 0u32)];
    let (total, _) = gk15(&f, a, b);
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, err) = gk15(&f, lo, hi);
        if err <= rtol * 1e-2 * total.abs() || depth >= 40 {
            done += v;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    done
}

/// `ln E[X^k 1{|X| > x}]` for standard normal `X`, by quadrature of
/// `2φ(x)∫₀^∞ (x+u)^k e^{−xu−u²/2} du`.
pub fn ln_truncated_moment(k: i32, x: f64) -> f64 {
    let upper = if x > 0.0 { (75.0 / x).min(12.0) } else { 12.0 };
    let integral = integrate(
        |u| (x + u).powi(k) * (-x * u - 0.5 * u * u).exp(),
        0.0,
        upper,
        1e-13,
    );
    let ln_phi = -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln();
    std::f64::consts::LN_2 + ln_phi + integral.ln()
}

/// `C(n, k)`, saturating at `u128::MAX` once it passes `2^64`.
pub fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c > u64::MAX as u128 {
            return u128::MAX;
        }
    }
    c
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < n - k + i {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Counts of `|S ∩ S′|` over pairs of `s`-subsets of `0..d`.
///
/// Pairs are enumerated on the smaller side: with `c = d − s < s` the
/// complements are enumerated and `|S ∩ S′| = |Sᶜ ∩ S′ᶜ| + 2s − d`. With
/// `all_pairs` every ordered pair is visited; otherwise the first support is
/// fixed, which gives the same distribution by symmetry.
pub fn overlap_histogram(s: usize, d: usize, all_pairs: bool) -> Vec<u128> {
    let c = s.min(d - s);
    let shift = s - c;
    let mut hist = vec![0u128; s + 1];
    let sets = subsets(d, c);
    let firsts = if all_pairs { &sets[..] } else { &sets[..1] };
    for a in firsts {
        let mut mark = vec![false; d];
        for &i in a {
            mark[i] = true;
        }
        for b in &sets {
            let common = b.iter().filter(|&&i| mark[i]).count();
            hist[common + shift] += 1;
        }
    }
    hist
}

/// `χ²` of the spiked mixture against pure noise from an overlap histogram:
/// `E b^{|S∩S′|} − 1` with `b = e^{ρ²}` (uniform) or `cosh ρ²` (signed).
pub fn chi2_from_histogram(hist: &[u128], rho: f64, signed: bool) -> f64 {
    let total: u128 = hist.iter().sum();
    let u = rho * rho;
    let ln_b = if signed {
        (2.0 * (0.5 * u).sinh().powi(2)).ln_1p()
    } else {
        u
    };
    hist.iter()
        .enumerate()
        .skip(1)
        .map(|(j, &n)| n as f64 / total as f64 * (j as f64 * ln_b).exp_m1())
        .sum()
}

#[derive(Debug, Deserialize)]
pub struct Band {
    pub measured: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

#[derive(Debug, Deserialize)]
pub struct Calibration {
    pub seed: u64,
    pub bands: BTreeMap<String, Band>,
    pub c_star: f64,
}

pub fn load_calibration() -> Calibration {
    let text = std::fs::read_to_string(grids::FIXTURE).expect("calibration fixture is missing");
    serde_json::from_str(&text).expect("calibration fixture is malformed")
}
