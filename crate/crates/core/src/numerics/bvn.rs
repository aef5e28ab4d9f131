//! Bivariate standard normal distribution function.
//!
//! Drezner & Wesolowsky's correlation-integral representation evaluated by
//! Gauss-Legendre quadrature, with Genz's double-precision modifications
//! for |r| close to 1 (the `BVND` routine of TVPACK).
#![allow(clippy::excessive_precision)]

use super::normal::norm_cdf;
use crate::error::{Error, Result};
use std::f64::consts::PI;

const TWO_PI: f64 = 2.0 * PI;

// (weight, abscissa) pairs on [-1, 0); the rule is symmetric.
const GL6: [(f64, f64); 3] = [
    (0.1713244923791705e+00, -0.9324695142031522e+00),
    (0.3607615730481384e+00, -0.6612093864662647e+00),
    (0.4679139345726904e+00, -0.2386191860831970e+00),
];

const GL12: [(f64, f64); 6] = [
    (0.4717533638651177e-01, -0.9815606342467191e+00),
    (0.1069393259953183e+00, -0.9041172563704750e+00),
    (0.1600783285433464e+00, -0.7699026741943050e+00),
    (0.2031674267230659e+00, -0.5873179542866171e+00),
    (0.2334925365383547e+00, -0.3678314989981802e+00),
    (0.2491470458134029e+00, -0.1252334085114692e+00),
];

const GL20: [(f64, f64); 10] = [
    (0.1761400713915212e-01, -0.9931285991850949e+00),
    (0.4060142980038694e-01, -0.9639719272779138e+00),
    (0.6267204833410906e-01, -0.9122344282513259e+00),
    (0.8327674157670475e-01, -0.8391169718222188e+00),
    (0.1019301198172404e+00, -0.7463319064601508e+00),
    (0.1181945319615184e+00, -0.6360536807265150e+00),
    (0.1316886384491766e+00, -0.5108670019508271e+00),
    (0.1420961093183821e+00, -0.3737060887154196e+00),
    (0.1491729864726037e+00, -0.2277858511416451e+00),
    (0.1527533871307259e+00, -0.7652652113349733e-01),
];

/// P(Z1 <= b1, Z2 <= b2) for standard normals with correlation `r`.
/// Infinite limits are handled analytically. Rejects |r| >= 1.
pub fn phi2(b1: f64, b2: f64, r: f64) -> Result<f64> {
    if !(r > -1.0 && r < 1.0) {
        return Err(Error::InvalidCorrelation(r));
    }
    Ok(phi2_unchecked(b1, b2, r))
}

/// [`phi2`] without the correlation check; callers guarantee |r| < 1.
#[inline]
pub fn phi2_unchecked(b1: f64, b2: f64, r: f64) -> f64 {
    if b1 == f64::NEG_INFINITY || b2 == f64::NEG_INFINITY {
        return 0.0;
    }
    if b1 == f64::INFINITY {
        return norm_cdf(b2);
    }
    if b2 == f64::INFINITY {
        return norm_cdf(b1);
    }
    if r == 0.0 {
        return norm_cdf(b1) * norm_cdf(b2);
    }
    bvnd(-b1, -b2, r).clamp(0.0, 1.0)
}

/// Upper orthant P(Z1 > h, Z2 > k) for finite h, k.
fn bvnd(h: f64, k: f64, r: f64) -> f64 {
    let ar = r.abs();
    let rule: &[(f64, f64)] = if ar < 0.3 {
        &GL6
    } else if ar < 0.75 {
        &GL12
    } else {
        &GL20
    };
    let mut hk = h * k;

    if ar < 0.925 {
        let hs = 0.5 * (h * h + k * k);
        let asr = r.asin();
        let mut bvn = 0.0;
        for &(w, x) in rule {
            for s in [x, -x] {
                let sn = (asr * (s + 1.0) * 0.5).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        return bvn * asr / (2.0 * TWO_PI) + norm_cdf(-h) * norm_cdf(-k);
    }

    let mut k = k;
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    let mut bvn = 0.0;
    if ar < 1.0 {
        let a2 = (1.0 - r) * (1.0 + r);
        let mut a = a2.sqrt();
        let b2 = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        bvn = a
            * (-(b2 / a2 + hk) / 2.0).exp()
            * (1.0 - c * (b2 - a2) * (1.0 - d * b2 / 5.0) / 3.0 + c * d * a2 * a2 / 5.0);
        if hk > -160.0 {
            let b = b2.sqrt();
            bvn -= (-hk / 2.0).exp()
                * TWO_PI.sqrt()
                * norm_cdf(-b / a)
                * b
                * (1.0 - c * b2 * (1.0 - d * b2 / 5.0) / 3.0);
        }
        a /= 2.0;
        for &(w, x) in rule {
            let xs = (a * (x + 1.0)).powi(2);
            let rs = (1.0 - xs).sqrt();
            bvn += a
                * w
                * ((-b2 / (2.0 * xs) - hk / (1.0 + rs)).exp() / rs
                    - (-(b2 / xs + hk) / 2.0).exp() * (1.0 + c * xs * (1.0 + d * xs)));
            let xs = a2 * (1.0 - x).powi(2) / 4.0;
            let rs = (1.0 - xs).sqrt();
            bvn += a
                * w
                * (-(b2 / xs + hk) / 2.0).exp()
                * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                    - (1.0 + c * xs * (1.0 + d * xs)));
        }
        bvn = -bvn / TWO_PI;
    }
    if r > 0.0 {
        bvn + norm_cdf(-h.max(k))
    } else {
        -bvn + (norm_cdf(-h) - norm_cdf(-k)).max(0.0)
    }
}
