//! Standard normal distribution: CDF, quantile function, and the quantile's
//! derivative factor used by the sensitivity formula.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use thiserror::Error;

/// Smallest distance from 0 or 1 accepted by [`std_normal_icdf`].
pub const BETA_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum GaussError {
    #[error("probability {0} outside [1e-12, 1 - 1e-12]")]
    Domain(f64),
    #[error("exp(phi^2/2) overflows for phi = {0}")]
    Saturation(f64),
}

/// A security level together with its standard-normal quantile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantile {
    pub beta: f64,
    pub phi: f64,
}

impl Quantile {
    pub fn new(beta: f64) -> Result<Self, GaussError> {
        Ok(Self {
            beta,
            phi: std_normal_icdf(beta)?,
        })
    }
}

/// `Φ(phi)` through the complementary error function, accurate in both tails.
pub fn std_normal_cdf(phi: f64) -> f64 {
    0.5 * libm::erfc(-phi * FRAC_1_SQRT_2)
}

/// `1 − Φ(phi)` without cancellation.
pub fn std_normal_sf(phi: f64) -> f64 {
    0.5 * libm::erfc(phi * FRAC_1_SQRT_2)
}

pub fn std_normal_pdf(phi: f64) -> f64 {
    (-0.5 * phi * phi).exp() / (2.0 * PI).sqrt()
}

/// `Φ⁻¹(beta)`: Wichura's AS 241 rational approximation followed by one
/// Newton step against the CDF.
pub fn std_normal_icdf(beta: f64) -> Result<f64, GaussError> {
    if !(BETA_EPS..=1.0 - BETA_EPS).contains(&beta) {
        return Err(GaussError::Domain(beta));
    }
    let phi = as241(beta);
    // Newton on whichever tail keeps the residual free of cancellation;
    // 1 − beta is exact for beta ≥ 0.5.
    let residual = if phi > 0.0 {
        (1.0 - beta) - std_normal_sf(phi)
    } else {
        std_normal_cdf(phi) - beta
    };
    Ok(phi - residual / std_normal_pdf(phi))
}

/// `dΦ⁻¹(β_k)/dβ = √(2π)·u_k·exp(φ_k²/2)` for a level moving as `β·u_k + β₀`.
pub fn dphi_dbeta(phi: f64, u: f64) -> Result<f64, GaussError> {
    if u == 0.0 {
        return Ok(0.0);
    }
    let exponent = 0.5 * phi * phi;
    if exponent.is_nan() || exponent > f64::MAX.ln() {
        return Err(GaussError::Saturation(phi));
    }
    let value = (2.0 * PI).sqrt() * u * exponent.exp();
    if value.is_finite() {
        Ok(value)
    } else {
        Err(GaussError::Saturation(phi))
    }
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn as241(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_5,
        1.331_416_678_917_843_8e2,
        1.971_590_950_306_551_3e3,
        1.373_169_376_550_946e4,
        4.592_195_393_154_987e4,
        6.726_577_092_700_87e4,
        3.343_057_558_358_813e4,
        2.509_080_928_730_122_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091e1,
        6.871_870_074_920_579e2,
        5.394_196_021_424_751e3,
        2.121_379_430_158_659_7e4,
        3.930_789_580_009_271e4,
        2.872_908_573_572_194_3e4,
        5.226_495_278_852_545e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_5,
        4.630_337_846_156_545,
        5.769_497_221_460_691,
        3.647_848_324_763_204_5,
        1.270_458_252_452_368_4,
        2.417_807_251_774_506e-1,
        2.272_384_498_926_918_4e-2,
        7.745_450_142_783_414e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_759,
        1.676_384_830_183_803_8,
        6.897_673_349_851e-1,
        1.481_039_764_274_800_8e-1,
        1.519_866_656_361_645_7e-2,
        5.475_938_084_995_345e-4,
        1.050_750_071_644_416_9e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103,
        5.463_784_911_164_114,
        1.784_826_539_917_291_3,
        2.965_605_718_285_048_7e-1,
        2.653_218_952_657_612_4e-2,
        1.242_660_947_388_078_4e-3,
        2.711_555_568_743_487_6e-5,
        2.010_334_399_292_288_1e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_88e-1,
        1.369_298_809_227_358e-1,
        1.487_536_129_085_061_5e-2,
        7.868_691_311_456_133e-4,
        1.846_318_317_510_054_8e-5,
        1.421_511_758_316_446e-7,
        2.043_131_013_208_340_3e-15,
    ];

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let r = (-tail.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}
