//! Hand-transcribed closed forms of the ISQ-k test functions for k = 3, 4, 5.
//!
//! Each entry is the speed-`q/k` value of `g_k` (`w + u_q`) or `h_k`
//! (`w^2 + v_q`). `printed` is the expression as published; `fixed` is set
//! where the published expression has a transcription slip, and is what the
//! symbolic engine is held to.

#![allow(dead_code)]

use mgk_bounds::dist::JobSizeDistribution;

pub struct Env {
    pub lam: f64,
    pub es: f64,
    dist: JobSizeDistribution<f64>,
}

impl Env {
    pub fn new(dist: JobSizeDistribution<f64>, lam: f64) -> Self {
        Self {
            lam,
            es: dist.mean(),
            dist,
        }
    }

    /// `S~(a λ)`.
    pub fn st(&self, a: f64) -> f64 {
        self.dist.transform(a * self.lam)
    }

    /// `e^{-a λ w}`.
    pub fn e(&self, a: f64, w: f64) -> f64 {
        (-a * self.lam * w).exp()
    }
}

pub type Form = fn(&Env, f64) -> f64;

pub struct Golden {
    pub name: &'static str,
    pub k: usize,
    pub q: usize,
    /// `false` for `g_k`, `true` for `h_k`.
    pub affine: bool,
    pub printed: Form,
    pub fixed: Option<Form>,
}

impl Golden {
    pub fn reference(&self) -> Form {
        self.fixed.unwrap_or(self.printed)
    }
}

fn g3_2(c: &Env, w: f64) -> f64 {
    w + (1.0 - c.e(1.5, w)) / (3.0 * c.lam)
}

fn g3_1(c: &Env, w: f64) -> f64 {
    let s = c.st(1.5);
    w + 1.0 / c.lam + (2.0 * s - 3.0) * c.e(3.0, w) / (3.0 * c.lam) - 2.0 * s * c.e(1.5, w) / (3.0 * c.lam)
}

fn h3_2(c: &Env, w: f64) -> f64 {
    w * w + (6.0 * w * c.lam + 4.0 * c.e(1.5, w) - 4.0) / (9.0 * c.lam * c.lam)
}

fn h3_1(c: &Env, w: f64) -> f64 {
    let s = c.st(1.5);
    let (e3, e15) = (c.e(3.0, w), c.e(1.5, w));
    w * w
        + (-10.0 + 10.0 * e3 - 8.0 * s * e3 + 8.0 * s * e15) / (9.0 * c.lam * c.lam)
        + (2.0 * c.es - 2.0 * e3 * c.es + 6.0 * w) / (3.0 * c.lam)
}

fn g4_3(c: &Env, w: f64) -> f64 {
    w + (1.0 - c.e(4.0 / 3.0, w)) / (4.0 * c.lam)
}

fn g4_2(c: &Env, w: f64) -> f64 {
    let s = c.st(4.0 / 3.0);
    let (e2, e43) = (c.e(2.0, w), c.e(4.0 / 3.0, w));
    w + 3.0 / (4.0 * c.lam) * (1.0 - e2 + s * e2 - s * e43)
}

// The printed form has an empty `\label{}` where the last `λ` belongs.
fn g4_1(c: &Env, w: f64) -> f64 {
    let (s43, s2) = (c.st(4.0 / 3.0), c.st(2.0));
    let (e4, e2, e43) = (c.e(4.0, w), c.e(2.0, w), c.e(4.0 / 3.0, w));
    w + 3.0 / (2.0 * c.lam) * (1.0 - e4 + s2 * e4 - s2 * s43 * e4 - s2 * e2 + s43 * s2 * e2)
        + 9.0 / (8.0 * c.lam) * (s43 * s43 * e4 - s43 * s43 * e43)
}

fn h4_3_printed(c: &Env, w: f64) -> f64 {
    w * w - 3.0 / (8.0 * c.lam * c.lam) * (-4.0 * c.lam / 3.0).exp() + w / (2.0 * c.lam)
}

fn h4_3(c: &Env, w: f64) -> f64 {
    w * w + 3.0 / (8.0 * c.lam * c.lam) * (c.e(4.0 / 3.0, w) - 1.0) + w / (2.0 * c.lam)
}

fn h4_2(c: &Env, w: f64) -> f64 {
    let s = c.st(4.0 / 3.0);
    let (e2, e43) = (c.e(2.0, w), c.e(4.0 / 3.0, w));
    w * w
        + 9.0 / (8.0 * c.lam * c.lam) * (-1.0 + e2 - s * e2 + s * e43)
        + (3.0 * w + c.es - e2 * c.es) / (2.0 * c.lam)
}

fn h4_1_printed(c: &Env, w: f64) -> f64 {
    let (s43, s2) = (c.st(4.0 / 3.0), c.st(2.0));
    let (e4, e2, e43) = (c.e(4.0, w), c.e(2.0, w), c.e(4.0 / 3.0, w));
    let l2 = c.lam * c.lam;
    w * w + 15.0 / (8.0 * l2) * (-1.0 + e4)
        + 9.0 / (4.0 * l2) * (s2 * e4 + 9.0 * s43 * s2 * e4 + s2 * e2)
        + 27.0 / (16.0 * l2) * (s43 * s43 * e4 + s43 * s43 * e43)
        + (3.0 * w + 2.0 * c.es - 2.0 * e4 * c.es + s2 * c.es * (e4 - e2)) / c.lam
}

fn h4_1(c: &Env, w: f64) -> f64 {
    let (s43, s2) = (c.st(4.0 / 3.0), c.st(2.0));
    let (e4, e2, e43) = (c.e(4.0, w), c.e(2.0, w), c.e(4.0 / 3.0, w));
    let l2 = c.lam * c.lam;
    w * w + 15.0 / (8.0 * l2) * (-1.0 + e4)
        + 9.0 / (4.0 * l2) * (-s2 * e4 + s43 * s2 * e4 + s2 * e2 - s43 * s2 * e2)
        + 27.0 / (16.0 * l2) * (s43 * s43 * e43 - s43 * s43 * e4)
        + (3.0 * w + 2.0 * c.es - 2.0 * e4 * c.es + s2 * c.es * (e4 - e2)) / c.lam
}

fn g5_4(c: &Env, w: f64) -> f64 {
    w + (1.0 - c.e(1.25, w)) / (5.0 * c.lam)
}

fn g5_3(c: &Env, w: f64) -> f64 {
    let s = c.st(1.25);
    let (e53, e54) = (c.e(5.0 / 3.0, w), c.e(1.25, w));
    w + (3.0 - 3.0 * e53 + 4.0 * s * e53 - 4.0 * s * e54) / (5.0 * c.lam)
}

fn g5_2_with(c: &Env, w: f64, sign: f64) -> f64 {
    let (s54, s53) = (c.st(1.25), c.st(5.0 / 3.0));
    let (e52, e53, e54) = (c.e(2.5, w), c.e(5.0 / 3.0, w), c.e(1.25, w));
    let l = c.lam;
    w + 6.0 / (5.0 * l) * (1.0 - e52)
        + 8.0 / (5.0 * l) * (s54 * s54 * e52 - s54 * s54 * e54)
        + 9.0 / (5.0 * l) * (s53 * e52 + sign * s53 * e53)
        + 12.0 / (5.0 * l) * (s54 * s53 * e53 - s54 * s53 * e52)
}

fn g5_2_printed(c: &Env, w: f64) -> f64 {
    g5_2_with(c, w, 1.0)
}

fn g5_2(c: &Env, w: f64) -> f64 {
    g5_2_with(c, w, -1.0)
}

fn g5_1_printed(c: &Env, w: f64) -> f64 {
    let (s54, s53, s52) = (c.st(1.25), c.st(5.0 / 3.0), c.st(2.5));
    let (e5, e52, e53, e54) = (c.e(5.0, w), c.e(2.5, w), c.e(5.0 / 3.0, w), c.e(1.25, w));
    let l = c.lam;
    w + 2.0 / l * (1.0 - e5)
        + 32.0 * s54.powi(3) / (15.0 * l) * (e5 - e54)
        + 27.0 / (10.0 * l) * (s53 * s53 * e5 + s53 * s53 * e53)
        + 18.0 / (5.0 * l) * (s53 * s52 * e52 - s53 * s52 * e5 - s54 * s53 * s53 * e5 + s54 * s53 * s53 * e53)
        + 12.0 / (5.0 * l) * (s52 * e5 - s52 * e52)
        + 16.0 / (5.0 * l) * (s54 * s54 * s52 * e52 - s54 * s54 * s52 * e5)
        + 32.0 / (15.0 * l) * (s54.powi(3) * e5 - s54.powi(3) * e54)
}

fn g5_1(c: &Env, w: f64) -> f64 {
    let (s54, s53, s52) = (c.st(1.25), c.st(5.0 / 3.0), c.st(2.5));
    let (e5, e52, e53, e54) = (c.e(5.0, w), c.e(2.5, w), c.e(5.0 / 3.0, w), c.e(1.25, w));
    let l = c.lam;
    w + 2.0 / l * (1.0 - e5)
        + 32.0 * s54.powi(3) / (15.0 * l) * (e5 - e54)
        + 27.0 / (10.0 * l) * (s53 * s53 * e5 - s53 * s53 * e53)
        + 18.0 / (5.0 * l) * (s53 * s52 * e52 - s53 * s52 * e5 - s54 * s53 * s53 * e5 + s54 * s53 * s53 * e53)
        + 12.0 / (5.0 * l) * (s52 * e5 - s52 * e52)
        + 16.0 / (5.0 * l) * (s54 * s54 * s52 * e52 - s54 * s54 * s52 * e5)
        + 24.0 / (5.0 * l) * s54 * s53 * s52 * (e5 - e52)
}

fn h5_4(c: &Env, w: f64) -> f64 {
    w * w + 2.0 * w / (5.0 * c.lam) + 8.0 / (25.0 * c.lam * c.lam) * (-1.0 + c.e(1.25, w))
}

fn h5_3_with(c: &Env, w: f64, a: f64) -> f64 {
    let s54 = c.st(1.25);
    let (e53, e54) = (c.e(5.0 / 3.0, w), c.e(1.25, w));
    let (l, l2) = (c.lam, c.lam * c.lam);
    w * w + 6.0 * w / (5.0 * l) + 2.0 * c.es / (5.0 * l) - 2.0 * c.es / (5.0 * l) * e53
        + 26.0 / (25.0 * l2) * (c.e(a, w) - 1.0)
        + 32.0 * s54 / (25.0 * l2) * (e54 - e53)
}

fn h5_3_printed(c: &Env, w: f64) -> f64 {
    h5_3_with(c, w, 2.5)
}

fn h5_3(c: &Env, w: f64) -> f64 {
    h5_3_with(c, w, 5.0 / 3.0)
}

fn h5_2(c: &Env, w: f64) -> f64 {
    let (s54, s53) = (c.st(1.25), c.st(5.0 / 3.0));
    let (e52, e53, e54) = (c.e(2.5, w), c.e(5.0 / 3.0, w), c.e(1.25, w));
    let (l, l2) = (c.lam, c.lam * c.lam);
    w * w + 12.0 * w / (5.0 * l)
        + 8.0 * c.es / (5.0 * l) * (1.0 - e52)
        + 6.0 * s53 * c.es / (5.0 * l) * (e52 - e53)
        + 2.0 / l2 * (e52 - 1.0)
        + 64.0 * s54 * s54 / (25.0 * l2) * (e54 - e52)
        + 78.0 * s53 / (25.0 * l2) * (e53 - e52)
        + 96.0 * s54 * s53 / (25.0 * l2) * (e52 - e53)
}

/// `es_coeff` multiplies the `S~(5λ/3)^2 E[S]` group, `a` and `b` are the
/// rate multipliers of the `117/25` and `4 S~(5λ/2)` groups.
fn h5_1_with(c: &Env, w: f64, es_coeff: f64, a: f64, b: f64) -> f64 {
    let (s54, s53, s52) = (c.st(1.25), c.st(5.0 / 3.0), c.st(2.5));
    let (e5, e52, e53, e54) = (c.e(5.0, w), c.e(2.5, w), c.e(5.0 / 3.0, w), c.e(1.25, w));
    let (l, l2, es) = (c.lam, c.lam * c.lam, c.es);
    w * w + 4.0 * w / l + 4.0 * es / l - 4.0 * es * e5 / l
        + es_coeff * s53 * s53 * es / l * (e5 - e53)
        + 12.0 * s53 * s52 * es / (5.0 * l) * (e52 - e5)
        + 16.0 * s52 * es / (5.0 * l) * (e5 - e52)
        + 14.0 / (5.0 * l2) * (e5 - 1.0)
        + 256.0 * s54.powi(3) / (75.0 * l2) * (e54 - e5)
        + 117.0 * s53 * s53 / (25.0 * l2) * (c.e(a, w) - e5)
        + 144.0 * s54 * s53 * s53 / (25.0 * l2) * (e5 - e53)
        + 4.0 * s52 / l2 * (c.e(b, w) - e5)
        + 128.0 * s54 * s54 * s52 / (25.0 * l2) * (e5 - e52)
        + 156.0 * s53 * s52 / (25.0 * l2) * (e5 - e52)
        + 192.0 * s54 * s53 * s52 / (25.0 * l2) * (e52 - e5)
}

// The printed form drops the `+` between the last two groups on one line;
// it is read as a sum.
fn h5_1_printed(c: &Env, w: f64) -> f64 {
    h5_1_with(c, w, 9.0, 2.5, 5.0 / 3.0)
}

fn h5_1(c: &Env, w: f64) -> f64 {
    h5_1_with(c, w, 9.0 / 5.0, 5.0 / 3.0, 2.5)
}

macro_rules! golden {
    ($name:literal, $k:literal, $q:literal, $affine:literal, $printed:ident) => {
        Golden { name: $name, k: $k, q: $q, affine: $affine, printed: $printed, fixed: None }
    };
    ($name:literal, $k:literal, $q:literal, $affine:literal, $printed:ident, $fixed:ident) => {
        Golden { name: $name, k: $k, q: $q, affine: $affine, printed: $printed, fixed: Some($fixed) }
    };
}

pub fn golden_forms() -> Vec<Golden> {
    vec![
        golden!("g3(w,2/3)", 3, 2, false, g3_2),
        golden!("g3(w,1/3)", 3, 1, false, g3_1),
        golden!("h3(w,2/3)", 3, 2, true, h3_2),
        golden!("h3(w,1/3)", 3, 1, true, h3_1),
        golden!("g4(w,3/4)", 4, 3, false, g4_3),
        golden!("g4(w,2/4)", 4, 2, false, g4_2),
        golden!("g4(w,1/4)", 4, 1, false, g4_1),
        golden!("h4(w,3/4)", 4, 3, true, h4_3_printed, h4_3),
        golden!("h4(w,2/4)", 4, 2, true, h4_2),
        golden!("h4(w,1/4)", 4, 1, true, h4_1_printed, h4_1),
        golden!("g5(w,4/5)", 5, 4, false, g5_4),
        golden!("g5(w,3/5)", 5, 3, false, g5_3),
        golden!("g5(w,2/5)", 5, 2, false, g5_2_printed, g5_2),
        golden!("g5(w,1/5)", 5, 1, false, g5_1_printed, g5_1),
        golden!("h5(w,4/5)", 5, 4, true, h5_4),
        golden!("h5(w,3/5)", 5, 3, true, h5_3_printed, h5_3),
        golden!("h5(w,2/5)", 5, 2, true, h5_2),
        golden!("h5(w,1/5)", 5, 1, true, h5_1_printed, h5_1),
    ]
}
