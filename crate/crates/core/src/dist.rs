//! Standard normal CDF, density, and quantile.
//!
//! The quantile uses Wichura's PPND16 rational approximation and the CDF is
//! built on Cody's rational erf/erfc, both accurate to within a few ulps in
//! f64. Everything here is deterministic and allocation free, which is what
//! the calibration and critical-value code relies on.

// Coefficient tables are kept at their published precision.
#![allow(clippy::excessive_precision)]

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Upper tail probability `P(Z > x)`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Standard normal quantile; `p` must lie strictly inside (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile argument out of (0,1): {p}");
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&PPND_A, r) / poly(&PPND_B, r);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let z = if r <= 5.0 {
        let r = r - 1.6;
        poly(&PPND_C, r) / poly(&PPND_D, r)
    } else {
        let r = r - 5.0;
        poly(&PPND_E, r) / poly(&PPND_F, r)
    };
    if q < 0.0 {
        -z
    } else {
        z
    }
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for &c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

// PPND16 coefficients (Wichura, AS 241).
const PPND_A: [f64; 8] = [
    3.387_132_872_796_366_608e0,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const PPND_B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
const PPND_C: [f64; 8] = [
    1.423_437_110_749_683_577_34e0,
    4.630_337_846_156_545_295_9e0,
    5.769_497_221_460_691_405_5e0,
    3.647_848_324_763_204_605_04e0,
    1.270_458_252_452_368_382_58e0,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
const PPND_D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87e0,
    1.676_384_830_183_803_849_4e0,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
const PPND_E: [f64; 8] = [
    6.657_904_643_501_103_777_2e0,
    5.463_784_911_164_114_369_9e0,
    1.784_826_539_917_291_335_8e0,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const PPND_F: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

/// Error function, |erf(x)| ≤ 1.
pub fn erf(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 0.46875 {
        let y = x * x;
        let mut num = ERF_A[4] * y;
        let mut den = y;
        for i in 0..3 {
            num = (num + ERF_A[i]) * y;
            den = (den + ERF_B[i]) * y;
        }
        x * (num + ERF_A[3]) / (den + ERF_B[3])
    } else {
        let ec = erfc(ax);
        let v = 1.0 - ec;
        if x < 0.0 {
            -v
        } else {
            v
        }
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 0.46875 {
        return 1.0 - erf(x);
    }
    let v = if ax <= 4.0 {
        let mut num = ERFC_C[8] * ax;
        let mut den = ax;
        for i in 0..7 {
            num = (num + ERFC_C[i]) * ax;
            den = (den + ERFC_D[i]) * ax;
        }
        scaled_exp(ax) * (num + ERFC_C[7]) / (den + ERFC_D[7])
    } else if ax < 26.6 {
        let y = 1.0 / (ax * ax);
        let mut num = ERFC_P[5] * y;
        let mut den = y;
        for i in 0..4 {
            num = (num + ERFC_P[i]) * y;
            den = (den + ERFC_Q[i]) * y;
        }
        let r = y * (num + ERFC_P[4]) / (den + ERFC_Q[4]);
        scaled_exp(ax) * (FRAC_1_SQRT_PI - r) / ax
    } else {
        0.0
    };
    if x < 0.0 {
        2.0 - v
    } else {
        v
    }
}

// exp(-x^2) evaluated as exp(-y^2) * exp(-(x-y)(x+y)) with y the nearest
// 1/16th below x, which keeps the argument splitting exact in f64.
fn scaled_exp(x: f64) -> f64 {
    let y = (x * 16.0).trunc() / 16.0;
    let d = (x - y) * (x + y);
    (-y * y).exp() * (-d).exp()
}

const ERF_A: [f64; 5] = [
    3.161_123_743_870_565_6e0,
    1.138_641_541_510_501_56e2,
    3.774_852_376_853_020_2e2,
    3.209_377_589_138_469_47e3,
    1.857_777_061_846_031_53e-1,
];
const ERF_B: [f64; 4] = [
    2.360_129_095_234_412_09e1,
    2.440_246_379_344_441_73e2,
    1.282_616_526_077_372_28e3,
    2.844_236_833_439_170_6e3,
];
const ERFC_C: [f64; 9] = [
    5.641_884_969_886_700_9e-1,
    8.883_149_794_388_375_94e0,
    6.611_919_063_714_162_95e1,
    2.986_351_381_974_001_31e2,
    8.819_522_212_417_690_9e2,
    1.712_047_612_634_070_58e3,
    2.051_078_377_826_071_47e3,
    1.230_339_354_797_997_25e3,
    2.153_115_354_744_038_46e-8,
];
const ERFC_D: [f64; 8] = [
    1.574_492_611_070_983_47e1,
    1.176_939_508_913_124_99e2,
    5.371_811_018_620_098_58e2,
    1.621_389_574_566_690_19e3,
    3.290_799_235_733_459_63e3,
    4.362_619_090_143_247_16e3,
    3.439_367_674_143_721_64e3,
    1.230_339_354_803_749_42e3,
];
const ERFC_P: [f64; 6] = [
    3.053_266_349_612_323_44e-1,
    3.603_448_999_498_044_39e-1,
    1.257_817_261_112_292_46e-1,
    1.608_378_514_874_227_66e-2,
    6.587_491_615_298_378_03e-4,
    1.631_538_713_730_209_78e-2,
];
const ERFC_Q: [f64; 5] = [
    2.568_520_192_289_822_42e0,
    1.872_952_849_923_460_47e0,
    5.279_051_029_514_284_12e-1,
    6.051_834_131_244_131_91e-2,
    2.335_204_976_268_691_85e-3,
];
