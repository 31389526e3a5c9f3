//! Normal-distribution special functions on top of `libm`.

use core::f64::consts::FRAC_1_SQRT_2;

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * libm::exp(-0.5 * z * z)
}

#[inline]
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// P(lo < Z < hi) for a standard normal, accurate in both tails.
pub fn normal_interval(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if lo > 0.0 {
        normal_cdf(-lo) - normal_cdf(-hi)
    } else {
        normal_cdf(hi) - normal_cdf(lo)
    }
}

/// Inverse standard normal CDF (Wichura, AS 241 / PPND16), relative error ~1e-16.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = (((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r
            + 6.726_577_092_700_87e4)
            * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_5)
            * q;
        let den = ((((((5.226_495_278_852_545e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return num / den;
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = libm::sqrt(-libm::log(r));
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_7e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Density of N(mean, sd^2) truncated to [lo, hi].
pub fn truncated_normal_pdf(a: f64, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    if a < lo || a > hi {
        return 0.0;
    }
    let mass = normal_interval((lo - mean) / sd, (hi - mean) / sd);
    if mass <= 0.0 {
        return 0.0;
    }
    normal_pdf((a - mean) / sd) / (sd * mass)
}

/// Mean of N(mean, sd^2) truncated to [lo, hi].
pub fn truncated_normal_mean(mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    let (alpha, beta) = ((lo - mean) / sd, (hi - mean) / sd);
    let mass = normal_interval(alpha, beta);
    mean + sd * (normal_pdf(alpha) - normal_pdf(beta)) / mass
}

/// Inverse-CDF draw from N(mean, sd^2) truncated to [lo, hi] given a uniform `u` in (0, 1).
pub fn truncated_normal_inverse(u: f64, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    let (alpha, beta) = ((lo - mean) / sd, (hi - mean) / sd);
    // Work in whichever tail keeps the CDF values small and therefore precise.
    let z = if alpha > 0.0 {
        let (pl, ph) = (normal_cdf(-beta), normal_cdf(-alpha));
        -normal_quantile(pl + u * (ph - pl))
    } else {
        let (pl, ph) = (normal_cdf(alpha), normal_cdf(beta));
        normal_quantile(pl + u * (ph - pl))
    };
    (mean + sd * z).clamp(lo, hi)
}

/// cot(x) written as cos/sin.
#[inline]
pub fn cot(x: f64) -> f64 {
    libm::cos(x) / libm::sin(x)
}

/// x * cot(x * theta), continuous at x = 0 where it equals 1/theta.
#[inline]
pub fn scaled_cot(x: f64, theta: f64) -> f64 {
    if x == 0.0 {
        1.0 / theta
    } else {
        x * cot(x * theta)
    }
}
