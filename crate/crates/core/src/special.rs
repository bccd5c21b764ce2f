//! Bessel functions of the first and second kind for real order.
//!
//! Non-negative orders are delegated to `puruspe` (Steed's continued
//! fractions with Temme's series). Negative orders use the reflection
//! formulas
//!
//! ```text
//! J_{−μ} = cos(πμ)·J_μ − sin(πμ)·Y_μ
//! Y_{−μ} = sin(πμ)·J_μ + cos(πμ)·Y_μ
//! ```

use crate::error::{LatticeError, Result};

pub const MAX_ARGUMENT: f64 = 2000.0;
pub const MAX_ORDER: f64 = 1000.0;

/// `(cos πμ, sin πμ)`, exact at integers and half-integers.
fn cos_sin_pi(mu: f64) -> (f64, f64) {
    let r = mu.rem_euclid(2.0);
    if r == 0.0 {
        (1.0, 0.0)
    } else if r == 0.5 {
        (0.0, 1.0)
    } else if r == 1.0 {
        (-1.0, 0.0)
    } else if r == 1.5 {
        (0.0, -1.0)
    } else {
        let t = std::f64::consts::PI * r;
        (t.cos(), t.sin())
    }
}

/// `(J_ν(x), Y_ν(x))` for real `ν` and `0 < x ≤ MAX_ARGUMENT`.
pub fn bessel_jy(order: f64, x: f64) -> Result<(f64, f64)> {
    let domain = || LatticeError::SpecialFunctionDomain { order, argument: x };
    if !(x > 0.0 && x <= MAX_ARGUMENT) || !order.is_finite() || order.abs() > MAX_ORDER {
        return Err(domain());
    }
    let mu = order.abs();
    let (j, y, _, _) = puruspe::besseljy(mu, x);
    let (j, y) = if order >= 0.0 {
        (j, y)
    } else {
        let (c, s) = cos_sin_pi(mu);
        (c * j - s * y, s * j + c * y)
    };
    if !j.is_finite() || !y.is_finite() || (j == 0.0 && y == 0.0) {
        return Err(domain());
    }
    Ok((j, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// (order, x, J, Y) from 40-digit arbitrary-precision evaluation.
    const REFERENCE: &[(f64, f64, f64, f64)] = &[
        (-10.3, 0.5, 295202269753.77637, -214477003339.82816),
        (-10.3, 1.7, 1063816.5848179215, -772907.990867609),
        (-10.3, 4.0, 227.74283742647788, -165.4647093998062),
        (-10.3, 12.5, 0.1646937293582683, 0.24213468727826856),
        (-10.3, 40.0, 0.12636846914456265, 0.02235925450489692),
        (-2.5, 0.5, 14.138547422284622, 0.009236407819379724),
        (-2.5, 1.7, 1.067908589925305, 0.16223862832956207),
        (-2.5, 4.0, -0.0145679476685218, 0.44088497455734116),
        (-2.5, 12.5, -0.2244476621096877, -0.039363071708003454),
        (-2.5, 40.0, 0.0910309678762172, -0.08751431140932354),
        (-1.0, 0.5, -0.2422684576748739, 1.471472392670243),
        (-1.0, 1.7, -0.5777652315290233, 0.2847262450640684),
        (-1.0, 4.0, 0.06604332802354913, -0.3979257105571),
        (-1.0, 12.5, 0.16548380461475973, 0.1538382565375012),
        (-1.0, 40.0, -0.126038318037585, 0.005793505821549633),
        (-0.7, 0.5, 0.7027476034933752, 1.0073195716788674),
        (-0.7, 1.7, -0.3016839970734541, 0.5436161025558843),
        (-0.7, 4.0, -0.1444003116057766, -0.3733874039615382),
        (-0.7, 12.5, 0.21832638956386194, 0.057462704788422185),
        (-0.7, 40.0, -0.1092622574532821, 0.06307492438076907),
        (0.0, 0.5, 0.9384698072408129, -0.44451873350670656),
        (0.0, 1.7, 0.3979848594461095, 0.4520270001816346),
        (0.0, 4.0, -0.39714980986384735, -0.016940739325064992),
        (0.0, 12.5, 0.1468840547004211, -0.1712143068446693),
        (0.0, 40.0, 0.00736689058423729, 0.12593641705826092),
        (0.3, 0.5, 0.7002604885070547, -0.8080475074774909),
        (0.3, 1.7, 0.5575784034520822, 0.23658404548525758),
        (0.3, 4.0, -0.36380686362795983, 0.16145424119382165),
        (0.3, 12.5, 0.05393893348301342, -0.21907614958327856),
        (0.3, 40.0, 0.06361630477913564, 0.10893881357843067),
        (1.0, 0.5, 0.2422684576748739, -1.471472392670243),
        (1.0, 1.7, 0.5777652315290233, -0.2847262450640684),
        (1.0, 4.0, -0.06604332802354913, 0.3979257105571),
        (1.0, 12.5, -0.16548380461475973, -0.1538382565375012),
        (1.0, 40.0, 0.126038318037585, -0.005793505821549633),
        (2.5, 0.5, 0.009236407819379724, -14.138547422284622),
        (2.5, 1.7, 0.16223862832956207, -1.067908589925305),
        (2.5, 4.0, 0.44088497455734116, 0.0145679476685218),
        (2.5, 12.5, -0.039363071708003454, 0.2244476621096877),
        (2.5, 40.0, -0.08751431140932354, -0.0910309678762172),
        (7.9, 0.5, 5.343986365672078e-10, -75551596.36345316),
        (7.9, 1.7, 7.837864617822808e-06, -5266.40218652925),
        (7.9, 4.0, 0.004628553475192454, -10.159402492649257),
        (7.9, 12.5, -0.07555260173659237, 0.24386887635849858),
        (7.9, 40.0, -0.09828702678349012, 0.0810758508733452),
        (20.4, 0.5, 6.370606369305114e-32, -2.4500220297092406e+29),
        (20.4, 1.7, 4.2948258839600485e-21, -3.645787415725561e+18),
        (20.4, 4.0, 1.4027041634298205e-13, -113446230274.46977),
        (20.4, 12.5, 0.0003122162458216668, -63.374749663978555),
        (20.4, 40.0, 0.13559474212873288, -0.01046350223482799),
        (35.0, 0.5, 8.183020779592047e-62, -1.1115084929709374e+59),
        (35.0, 1.7, 3.2115252220312803e-43, -2.83520236881528e+40),
        (35.0, 4.0, 2.975017457901708e-30, -3.0771585719542975e+27),
        (35.0, 12.5, 2.3074944557787047e-13, -42199433972.78229),
        (35.0, 40.0, 0.11793592685108871, 0.1355446640844455),
    ];

    #[test]
    fn matches_reference_values() {
        for &(order, x, j_ref, y_ref) in REFERENCE {
            let (j, y) = bessel_jy(order, x).unwrap();
            // Oscillatory functions are judged relative to their modulus,
            // monotone ones (|J| ≪ |Y|) relative to their own size.
            let modulus = j_ref.hypot(y_ref);
            let j_scale = if j_ref.abs() < 1e-6 * modulus { j_ref.abs() } else { modulus };
            assert!(
                (j - j_ref).abs() <= 1e-8 * j_scale,
                "J_{order}({x}) = {j}, expected {j_ref}"
            );
            assert!(
                (y - y_ref).abs() <= 1e-8 * modulus,
                "Y_{order}({x}) = {y}, expected {y_ref}"
            );
        }
    }

    #[test]
    fn wronskian_identity() {
        // J_{ν+1}Y_ν − J_νY_{ν+1} = 2/(πx)
        for order in [-7.25, -3.5, -0.4, 0.0, 1.6, 9.1] {
            for x in [0.8, 3.0, 17.0] {
                let (j0, y0) = bessel_jy(order, x).unwrap();
                let (j1, y1) = bessel_jy(order + 1.0, x).unwrap();
                let w = j1 * y0 - j0 * y1;
                let expected = 2.0 / (std::f64::consts::PI * x);
                let scale = (j0.abs() + y0.abs()) * (j1.abs() + y1.abs());
                assert!((w - expected).abs() <= 1e-10 * scale.max(expected), "ν={order} x={x}");
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(bessel_jy(0.5, 0.0).is_err());
        assert!(bessel_jy(0.5, -1.0).is_err());
        assert!(bessel_jy(f64::NAN, 1.0).is_err());
        assert!(bessel_jy(2000.0, 1.0).is_err());
        assert!(bessel_jy(0.5, 1e6).is_err());
        // Y overflows long before the order cap for small arguments.
        assert!(matches!(
            bessel_jy(400.0, 0.01),
            Err(LatticeError::SpecialFunctionDomain { .. })
        ));
    }
}
