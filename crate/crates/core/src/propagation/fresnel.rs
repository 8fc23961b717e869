//! Fresnel integrals and the knife-edge diffraction factor.

use num_complex::Complex64;

use crate::math::{abs, sqrt, PI};

const SERIES_LIMIT: f64 = 1.5;
const MAX_ITER: usize = 200;
const TOL: f64 = 1e-16;

/// Returns `(C(x), S(x))` with `C(x) = ∫₀ˣ cos(πt²/2) dt` and
/// `S(x) = ∫₀ˣ sin(πt²/2) dt`.
pub fn fresnel_integrals(x: f64) -> (f64, f64) {
    let ax = abs(x);
    let (c, s) = if ax < SERIES_LIMIT {
        series(ax)
    } else {
        continued_fraction(ax)
    };
    if x < 0.0 {
        (-c, -s)
    } else {
        (c, s)
    }
}

fn series(x: f64) -> (f64, f64) {
    // C = Σ (-1)^n (π/2)^{2n} x^{4n+1} / ((2n)!(4n+1))
    // S = Σ (-1)^n (π/2)^{2n+1} x^{4n+3} / ((2n+1)!(4n+3))
    let half_pi_x2 = 0.5 * PI * x * x;
    let mut term = x; // (π x²/2)^k x / k!
    let mut c = 0.0;
    let mut s = 0.0;
    let mut k = 0usize;
    loop {
        let contribution = term / (2 * k + 1) as f64;
        let signed = if (k / 2) % 2 == 0 { contribution } else { -contribution };
        if k % 2 == 0 {
            c += signed;
        } else {
            s += signed;
        }
        if abs(contribution) < TOL * (abs(c) + abs(s)).max(1e-300) || k > MAX_ITER {
            break;
        }
        k += 1;
        term *= half_pi_x2 / k as f64;
    }
    (c, s)
}

fn continued_fraction(x: f64) -> (f64, f64) {
    // Modified Lentz evaluation of the complementary error function form.
    let pix2 = PI * x * x;
    let mut b = Complex64::new(1.0, -pix2);
    let mut cc = Complex64::new(1.0 / f64::MIN_POSITIVE, 0.0);
    let mut d = Complex64::new(1.0, 0.0) / b;
    let mut h = d;
    let mut n = -1.0_f64;
    for _ in 2..=MAX_ITER {
        n += 2.0;
        let a = -n * (n + 1.0);
        b += Complex64::new(4.0, 0.0);
        d = Complex64::new(1.0, 0.0) / (d * a + b);
        cc = b + Complex64::new(a, 0.0) / cc;
        let del = cc * d;
        h *= del;
        if (del - 1.0).l1_norm() < TOL {
            break;
        }
    }
    h *= Complex64::new(x, -x);
    let phase = Complex64::new(libm::cos(0.5 * pix2), libm::sin(0.5 * pix2));
    let cs = Complex64::new(0.5, 0.5) * (Complex64::new(1.0, 0.0) - phase * h);
    (cs.re, cs.im)
}

/// Complex knife-edge factor `F(ν) = (1+j)/2 ∫_ν^∞ exp(-jπt²/2) dt`.
pub fn knife_edge(nu: f64) -> Complex64 {
    let (c, s) = fresnel_integrals(nu);
    Complex64::new(0.5, 0.5) * Complex64::new(0.5 - c, -(0.5 - s))
}

/// Knife-edge amplitude relative to free space, clamped to at most 1.
pub fn knife_edge_amplitude(nu: f64) -> f64 {
    knife_edge(nu).norm().min(1.0)
}

/// Fresnel–Kirchhoff parameter from the excess path length `Δ = d₁ + d₂ − d`.
///
/// `ν² = 4Δ/λ`, which matches `h·√(2(d₁+d₂)/(λd₁d₂))` to first order in the
/// clearance `h`. The sign marks the shadow side.
pub fn fresnel_parameter(excess_path: f64, wavelength: f64, shadowed: bool) -> f64 {
    let nu = 2.0 * sqrt(excess_path.max(0.0) / wavelength);
    if shadowed {
        nu
    } else {
        -nu
    }
}
