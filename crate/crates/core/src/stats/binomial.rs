//! Binomial point probabilities and the exact two-sided binomial test.
//!
//! Point probabilities use Loader's saddle-point expansion, which stays
//! accurate to a few ulps for large `n` where naive products underflow.

use super::special::ln_gamma;
use super::StatsError;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Relative tolerance when deciding whether an outcome is "as extreme" as
/// the observed one; absorbs rounding in otherwise tied probabilities.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// `stirlerr(n)` for n = 1..=15.
const STIRLERR_SMALL: [f64; 15] = [
    0.081_061_466_795_327_258_219_670_26,
    0.041_340_695_955_409_294_093_822_08,
    0.027_677_925_684_998_339_148_789_29,
    0.020_790_672_103_765_093_111_522_77,
    0.016_644_691_189_821_192_163_194_87,
    0.013_876_128_823_070_747_998_745_73,
    0.011_896_709_945_891_770_095_055_72,
    0.010_411_265_261_972_096_497_478_57,
    0.009_255_462_182_712_732_917_728_637,
    0.008_330_563_433_362_871_256_469_319,
    0.007_573_675_487_951_840_794_972_024,
    0.006_942_840_107_209_529_865_664_153,
    0.006_408_994_188_004_207_068_439_631,
    0.005_951_370_112_758_847_735_624_416,
    0.005_554_733_551_962_801_371_038_69,
];

/// Error of Stirling's approximation: `ln(n!) - ln(sqrt(2 pi n) (n/e)^n)`.
fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        if n >= 1.0 && n.fract() == 0.0 {
            return STIRLERR_SMALL[n as usize - 1];
        }
        return ln_gamma(n + 1.0) - (n + 0.5) * n.ln() + n - LN_SQRT_2PI;
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x/np) + np - x`, computed stably near `x = np`.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        if s.abs() < f64::MIN_POSITIVE {
            return s;
        }
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
        }
    }
    x * (x / np).ln() + np - x
}

/// Natural log of `P(X = k)` for `X ~ Binomial(n, p)`.
pub fn ln_binom_pmf(k: u64, n: u64, p: f64) -> f64 {
    let q = 1.0 - p;
    if k > n {
        return f64::NEG_INFINITY;
    }
    if p == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let (x, nf) = (k as f64, n as f64);
    if k == 0 {
        if n == 0 {
            return 0.0;
        }
        return if p > q { nf * q.ln() } else { nf * (-p).ln_1p() };
    }
    if k == n {
        return if p > q { nf * (-q).ln_1p() } else { nf * p.ln() };
    }
    let lc = stirlerr(nf) - stirlerr(x) - stirlerr(nf - x) - bd0(x, nf * p) - bd0(nf - x, nf * q);
    let lf = LN_2PI + x.ln() + (-x / nf).ln_1p();
    lc - 0.5 * lf
}

pub fn binom_pmf(k: u64, n: u64, p: f64) -> f64 {
    ln_binom_pmf(k, n, p).exp()
}

fn check(k: u64, n: u64, p0: f64) -> Result<(), StatsError> {
    if k > n {
        return Err(StatsError::Domain(format!("k = {k} exceeds n = {n}")));
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(StatsError::Domain(format!("p0 = {p0} outside (0, 1)")));
    }
    Ok(())
}

/// Largest index in `[lo, hi]` satisfying a predicate that holds on a prefix.
fn last_true(lo: u64, hi: u64, pred: impl Fn(u64) -> bool) -> Option<u64> {
    if !pred(lo) {
        return None;
    }
    let (mut a, mut b) = (lo, hi);
    while a < b {
        let mid = a + (b - a).div_ceil(2);
        if pred(mid) {
            a = mid;
        } else {
            b = mid - 1;
        }
    }
    Some(a)
}

/// Sums pmf terms walking away from the mode until they stop mattering.
fn tail_sum(indices: impl Iterator<Item = u64>, n: u64, p: f64) -> f64 {
    let mut sum = 0.0;
    for i in indices {
        let t = binom_pmf(i, n, p);
        sum += t;
        if t <= sum * 1e-18 {
            break;
        }
    }
    sum
}

/// Exact two-sided binomial test by the minimum-likelihood method: the sum
/// of `P(X = i)` over all outcomes no more probable than the observed `k`.
pub fn binomial_test_two_sided(k: u64, n: u64, p0: f64) -> Result<f64, StatsError> {
    check(k, n, p0)?;
    if n == 0 {
        return Ok(1.0);
    }
    let threshold = binom_pmf(k, n, p0) * (1.0 + TIE_TOLERANCE);
    let mode = (((n + 1) as f64 * p0).floor() as u64).min(n);
    let rare = |i: u64| binom_pmf(i, n, p0) <= threshold;

    // The pmf rises on [0, mode] and falls on [mode, n], so the rare
    // outcomes form a prefix of the former and a suffix of the latter.
    let lower_end = last_true(0, mode, rare);
    let upper_start = last_true(0, n - mode, |j| rare(n - j)).map(|j| n - j);

    if let (Some(le), Some(us)) = (lower_end, upper_start) {
        if le >= us || le + 1 == us {
            return Ok(1.0);
        }
    }
    let lower = lower_end.map_or(0.0, |le| tail_sum((0..=le).rev(), n, p0));
    let upper = upper_start.map_or(0.0, |us| tail_sum(us..=n, n, p0));
    Ok((lower + upper).min(1.0))
}
