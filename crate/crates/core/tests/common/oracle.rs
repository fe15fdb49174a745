//! Reference implementations used only by tests: exact rational binomial
//! enumeration and adaptive Gauss-Kronrod quadrature.

#![allow(dead_code)]

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

/// `num / den` rounded to f64, without intermediate overflow or underflow
/// until the final scaling.
pub fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let shift = (den.bits() as i64 - num.bits() as i64 + 80).max(0) as u64;
    let q = (num << shift) / den;
    let lead = q.bits().saturating_sub(64);
    let mut v = (q >> lead).to_f64().unwrap();
    let mut e = lead as i64 - shift as i64;
    while e < -1000 {
        v *= 2f64.powi(-1000);
        e += 1000;
    }
    while e > 1000 {
        v *= 2f64.powi(1000);
        e -= 1000;
    }
    v * 2f64.powi(e as i32)
}

/// Numerators `C(n, i) a^i (d - a)^(n - i)` of the Binomial(n, a/d) pmf;
/// the common denominator is `d^n`.
pub fn pmf_numerators(n: u64, a: u64, d: u64) -> (Vec<BigUint>, BigUint) {
    let b = d - a;
    let mut binom = BigUint::one();
    let mut pa = vec![BigUint::one()];
    let mut pb = vec![BigUint::one()];
    for i in 1..=n as usize {
        pa.push(&pa[i - 1] * a);
        pb.push(&pb[i - 1] * b);
    }
    let mut out = Vec::with_capacity(n as usize + 1);
    for i in 0..=n {
        if i > 0 {
            binom = binom * (n - i + 1) / i;
        }
        out.push(&binom * &pa[i as usize] * &pb[(n - i) as usize]);
    }
    let den = BigUint::from(d).pow(n as u32);
    (out, den)
}

/// Exact two-sided minimum-likelihood binomial p-value for `p0 = a / d`.
pub fn exact_two_sided(nums: &[BigUint], den: &BigUint, k: usize) -> f64 {
    let obs = &nums[k];
    let sum: BigUint = nums.iter().filter(|v| *v <= obs).sum();
    ratio_to_f64(&sum, den).min(1.0)
}

pub fn exact_pmf(nums: &[BigUint], den: &BigUint, k: usize) -> f64 {
    ratio_to_f64(&nums[k], den)
}

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

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: (f64, f64), tol: f64, depth: u32) -> f64 {
    let (v, err) = whole;
    if err <= tol || depth == 0 {
        return v;
    }
    let m = 0.5 * (a + b);
    let l = gk15(f, a, m);
    let r = gk15(f, m, b);
    adapt(f, a, m, l, tol, depth - 1) + adapt(f, m, b, r, tol, depth - 1)
}

/// `int_a^b f` to roughly `rel_tol` relative accuracy.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    let coarse = gk15(f, a, b);
    let scale = coarse.0.abs().max(f64::MIN_POSITIVE);
    adapt(f, a, b, coarse, rel_tol * scale, 24)
}

/// `ln Gamma(k / 2)` from exact factorial identities.
pub fn ln_gamma_half(k: u32) -> f64 {
    if k.is_multiple_of(2) {
        (1..k / 2).map(|i| f64::from(i).ln()).sum()
    } else {
        // Gamma(m + 1/2) = (2m)! sqrt(pi) / (4^m m!)
        let m = (k - 1) / 2;
        let ln_fact = |n: u32| (1..=n).map(|i| f64::from(i).ln()).sum::<f64>();
        ln_fact(2 * m) + 0.5 * std::f64::consts::PI.ln() - f64::from(m) * 4f64.ln() - ln_fact(m)
    }
}

/// Chi-squared upper tail by direct quadrature of the density over
/// `[x, x + 200]` in panels of width 2.
pub fn chi2_sf_quadrature(x: f64, dof: u32) -> f64 {
    let half = f64::from(dof) / 2.0;
    let ln_norm = half * 2f64.ln() + ln_gamma_half(dof);
    let density = move |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        ((half - 1.0) * t.ln() - t / 2.0 - ln_norm).exp()
    };
    let mut total = 0.0;
    let mut lo = x;
    let hi = x + 200.0;
    while lo < hi {
        let up = (lo + 2.0).min(hi);
        total += integrate(&density, lo, up, 1e-14);
        lo = up;
    }
    // Remaining mass beyond x + 200 is below 1e-40 of the total for dof <= 12.
    total
}
