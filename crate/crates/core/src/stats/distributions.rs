//! Tail probabilities used by the tests: F, normal, and the studentized range.
//!
//! The studentized range upper tail is evaluated directly (not as `1 - cdf`) so
//! that small p-values keep their relative precision:
//!
//! ```text
//! P(Q > q; k, ν) = ∫₀^∞ f_S(s) · P(R_k > q·s) ds,     S = sqrt(χ²_ν / ν)
//! P(R_k > w)     = k ∫ φ(z) [Q(z)^(k-1) − (Q(z) − Q(z+w))^(k-1)] dz
//! ```
//!
//! with `Q` the standard normal upper tail and `z` the sample minimum. Both
//! integrals use adaptive Gauss–Kronrod quadrature with relative tolerance
//! `1e-12`; the outer integral is seeded with breakpoints around the mode of
//! `f_S`, whose width shrinks like `1/sqrt(2ν)`.

use statrs::distribution::{ContinuousCDF, FisherSnedecor};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use super::quadrature::{integrate_breaks, Tolerance};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Above this many degrees of freedom `S` is treated as the constant 1.
const LARGE_DF: f64 = 1e8;

fn tolerance() -> Tolerance {
    Tolerance {
        abs_tol: 1e-300,
        rel_tol: 1e-12,
        initial_panels: 4,
        max_panels: 4000,
    }
}

/// Standard normal upper tail `P(Z > x)`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Two-sided normal p-value for a z statistic.
pub fn normal_two_sided_p(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    erfc(z.abs() / SQRT_2).min(1.0)
}

/// Upper tail of the F distribution with `(d1, d2)` degrees of freedom.
pub fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_nan() {
        return f64::NAN;
    }
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    let dist = FisherSnedecor::new(d1, d2).expect("positive degrees of freedom");
    dist.sf(f).clamp(0.0, 1.0)
}

/// `P(Φ⁻¹ mass between z and z + w)`, evaluated from whichever tail is smaller.
fn normal_interval(z: f64, w: f64) -> f64 {
    if z + 0.5 * w < 0.0 {
        normal_cdf(z + w) - normal_cdf(z)
    } else {
        normal_sf(z) - normal_sf(z + w)
    }
}

/// `P(R > w)` for the range `R` of `k` independent standard normals.
pub fn normal_range_sf(w: f64, k: usize) -> f64 {
    assert!(k >= 2, "range needs at least two samples");
    if w <= 0.0 {
        return 1.0;
    }
    if w.is_infinite() {
        return 0.0;
    }
    let m = (k - 1) as i32;
    let integrand = |z: f64| {
        let a = normal_sf(z);
        let b = normal_sf(z + w);
        let inner = normal_interval(z, w);
        // a^m − inner^m = b · Σ_j a^j inner^(m−1−j), with a − inner = b
        let mut acc = 0.0;
        let mut a_pow = 1.0;
        for j in 0..m {
            acc += a_pow * inner.powi(m - 1 - j);
            a_pow *= a;
        }
        k as f64 * normal_pdf(z) * b * acc
    };
    let lo = (-0.5 * w - 9.0).min(-9.0);
    let mid = -0.5 * w;
    let breaks = [lo, mid.min(-1.0), mid.clamp(-1.0, 0.0), 9.0];
    let est = integrate_breaks(integrand, &breaks, tolerance());
    est.value.clamp(0.0, 1.0)
}

fn ln_scale_density(s: f64, df: f64) -> f64 {
    std::f64::consts::LN_2 + 0.5 * df * df.ln() + (df - 1.0) * s.ln()
        - 0.5 * df * s * s
        - 0.5 * df * std::f64::consts::LN_2
        - ln_gamma(0.5 * df)
}

/// Upper tail `P(Q > q)` of the studentized range distribution for `k` groups
/// and `df` error degrees of freedom.
pub fn studentized_range_sf(q: f64, k: usize, df: f64) -> f64 {
    assert!(k >= 2, "studentized range needs at least two groups");
    assert!(df > 0.0, "degrees of freedom must be positive");
    if q.is_nan() {
        return f64::NAN;
    }
    if q <= 0.0 {
        return 1.0;
    }
    if q.is_infinite() {
        return 0.0;
    }
    if df >= LARGE_DF {
        return normal_range_sf(q, k);
    }

    let mode = if df > 1.0 { ((df - 1.0) / df).sqrt() } else { 0.0 };
    let spread = 1.0 / (2.0 * df).sqrt();
    let upper = (mode + 60.0 * spread).max((1500.0 / df).sqrt());
    let mut breaks = vec![0.0];
    for j in -12..=12 {
        let x = mode + spread * j as f64;
        if x > *breaks.last().unwrap() && x < upper {
            breaks.push(x);
        }
    }
    breaks.push(upper);

    let integrand = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        let ln_f = ln_scale_density(s, df);
        if ln_f < -745.0 {
            return 0.0;
        }
        ln_f.exp() * normal_range_sf(q * s, k)
    };
    let tol = Tolerance {
        initial_panels: 2,
        ..tolerance()
    };
    integrate_breaks(integrand, &breaks, tol).value.clamp(0.0, 1.0)
}

/// `P(Q ≤ q)` for the studentized range distribution.
pub fn studentized_range_cdf(q: f64, k: usize, df: f64) -> f64 {
    1.0 - studentized_range_sf(q, k, df)
}
