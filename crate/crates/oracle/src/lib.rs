//! Reference values for the HW example computed without the main crate:
//! tanh-sinh quadrature after the substitution `x = x*(1 − u²)`.
//!
//! With `x* = ε^{1/λ}`, `c = √(1 − ε)` and `w(u) = 1 − (1 − u²)^λ`,
//!
//! ```text
//! s0 = ∫_0^1 2 x* u √((1 − x^λ) / (ε w(u))) du
//! y1 = ∫_0^1 2 x* u c / √((1 − x^λ) ε w(u)) du
//! ```
//!
//! Both integrands are bounded at `u = 0` because `w(u) ≈ λ u²`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("parameter {name} = {value} out of range")]
    BadParameter { name: &'static str, value: f64 },
    #[error("tanh-sinh did not reach tolerance {tol:e} (last change {change:e})")]
    NotConverged { tol: f64, change: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    /// Relative change between successive tanh-sinh levels.
    pub tol: f64,
    pub max_level: u32,
    /// Seed for the random `(λ, ε)` samples.
    pub seed: u64,
    pub random_samples: usize,
    pub lambda: f64,
    pub eps_grid: Vec<f64>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            tol: 1e-15,
            max_level: 12,
            seed: 20_240_917,
            random_samples: 8,
            lambda: 1.5,
            eps_grid: vec![0.25, 0.4, 0.2, 0.1, 0.05, 0.01],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HwEntry {
    pub lambda: f64,
    pub eps: f64,
    pub x_star: f64,
    pub c: f64,
    pub s0: f64,
    pub y1: f64,
    /// `√(8 s0² − 4 y1²)`; `None` when `4 y1² > 8 s0²`.
    pub l_gamma0: Option<f64>,
    pub l_gamma_pm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Golden {
    pub generator: String,
    pub version: u32,
    pub settings: Settings,
    pub hw: Vec<HwEntry>,
    pub random: Vec<HwEntry>,
}

impl Golden {
    pub fn entry(&self, lambda: f64, eps: f64) -> Option<&HwEntry> {
        self.hw
            .iter()
            .chain(&self.random)
            .find(|e| e.lambda == lambda && e.eps == eps)
    }

    /// Pretty JSON with a trailing newline; the byte stream is a pure
    /// function of the settings.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("golden values serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// `∫_0^1 f` by tanh-sinh with step halving from `h = 1`.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, tol: f64, max_level: u32) -> Result<f64, OracleError> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    // abscissa x = (1 + tanh(π/2 sinh t)) / 2 and its distance to 1
    let node = |t: f64| {
        let s = half_pi * t.sinh();
        let e = (-2.0 * s.abs()).exp();
        let near = e / (1.0 + e); // distance to the nearer endpoint
        let w = half_pi * t.cosh() * 2.0 * e / ((1.0 + e) * (1.0 + e));
        let x = if s >= 0.0 { 1.0 - near } else { near };
        (x, near, w)
    };
    let term = |t: f64| {
        let (x, near, w) = node(t);
        if near <= 0.0 || w == 0.0 {
            return 0.0;
        }
        let v = f(x) * w;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let t_max = 6.5;
    let mut h = 1.0;
    let mut sum = term(0.0);
    let mut k = 1;
    while (k as f64) * h <= t_max {
        sum += term(k as f64 * h) + term(-(k as f64) * h);
        k += 1;
    }
    let mut estimate = h * sum;
    let mut change = f64::INFINITY;
    for _ in 0..max_level {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= t_max {
            sum += term(k as f64 * h) + term(-(k as f64) * h);
            k += 2;
        }
        let next = h * sum;
        change = (next - estimate).abs();
        estimate = next;
        if change <= tol * estimate.abs() {
            return Ok(estimate);
        }
    }
    Err(OracleError::NotConverged { tol, change })
}

pub fn hw_entry(lambda: f64, eps: f64, settings: &Settings) -> Result<HwEntry, OracleError> {
    if !(lambda > 1.0 && lambda < 2.0) {
        return Err(OracleError::BadParameter { name: "lambda", value: lambda });
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(OracleError::BadParameter { name: "eps", value: eps });
    }
    let x_star = eps.powf(1.0 / lambda);
    let c = (1.0 - eps).sqrt();
    // (1 − x^λ, ε w(u), Jacobian 2 x* u)
    let parts = move |u: f64| {
        let one_minus = 1.0 - u * u;
        let x = x_star * one_minus;
        let w = -(lambda * (-u * u).ln_1p()).exp_m1();
        (1.0 - x.powf(lambda), eps * w, 2.0 * x_star * u)
    };
    let s0 = tanh_sinh(
        |u| {
            let (a, b, j) = parts(u);
            j * (a / b).sqrt()
        },
        settings.tol,
        settings.max_level,
    )?;
    let y1 = tanh_sinh(
        |u| {
            let (a, b, j) = parts(u);
            j * c / (a * b).sqrt()
        },
        settings.tol,
        settings.max_level,
    )?;
    let l2 = 8.0 * s0 * s0 - 4.0 * y1 * y1;
    Ok(HwEntry {
        lambda,
        eps,
        x_star,
        c,
        s0,
        y1,
        l_gamma0: (l2 >= 0.0).then(|| l2.sqrt()),
        l_gamma_pm: 2.0 * s0,
    })
}

pub fn generate(settings: &Settings) -> Result<Golden, OracleError> {
    let hw = settings
        .eps_grid
        .iter()
        .map(|&eps| hw_entry(settings.lambda, eps, settings))
        .collect::<Result<_, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let random = (0..settings.random_samples)
        .map(|_| {
            let lambda: f64 = rng.gen_range(1.1..1.9);
            let eps: f64 = rng.gen_range(0.05..0.95);
            hw_entry(lambda, eps, settings)
        })
        .collect::<Result<_, _>>()?;
    Ok(Golden {
        generator: "filigeo-oracle".into(),
        version: FORMAT_VERSION,
        settings: settings.clone(),
        hw,
        random,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_sinh_on_known_integrals() {
        let t = |f: &dyn Fn(f64) -> f64| tanh_sinh(f, 1e-15, 12).unwrap();
        assert!((t(&|x| x * x) - 1.0 / 3.0).abs() < 1e-15);
        assert!((t(&|x| 1.0 / x.sqrt()) - 2.0).abs() < 1e-13);
        assert!((t(&|x| (1.0 - x * x).sqrt()) - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!((t(&|x| x.ln()) + 1.0).abs() < 1e-13);
    }

    #[test]
    fn matches_high_precision_reference() {
        // 25-digit mpmath quadrature
        let e = hw_entry(1.5, 0.25, &Settings::default()).unwrap();
        assert!((e.x_star - 0.396_850_262_992_049_9).abs() < 1e-15);
        assert!((e.s0 - 1.265_869).abs() < 1e-6, "{}", e.s0);
        assert!((e.y1 - 1.285_081).abs() < 1e-6, "{}", e.y1);
    }

    #[test]
    fn bad_parameters() {
        let s = Settings::default();
        assert!(matches!(hw_entry(2.0, 0.25, &s), Err(OracleError::BadParameter { name: "lambda", .. })));
        assert!(matches!(hw_entry(1.5, 1.0, &s), Err(OracleError::BadParameter { name: "eps", .. })));
    }

    #[test]
    fn generation_is_deterministic() {
        let s = Settings::default();
        let a = generate(&s).unwrap().to_json();
        let b = generate(&s).unwrap().to_json();
        assert_eq!(a, b);
        let back = Golden::from_json(&a).unwrap();
        assert_eq!(back.to_json(), a);
        assert!(back.entry(1.5, 0.25).is_some());
    }
}
