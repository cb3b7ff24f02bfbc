//! Adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Panels are kept in a max-heap keyed by their error estimate and the worst
//! panel is bisected until the summed error estimate meets
//! `max(abs_tol, rel_tol * |value|)` or the panel budget runs out.
//! Semi-infinite ranges go through `x = a + (1 - t) / t`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::scalar::Scalar;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("integrand returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
    #[error("panel budget of {panels} exhausted: estimate {value} with error {error} above tolerance {tolerance}")]
    Budget {
        panels: usize,
        value: f64,
        error: f64,
        tolerance: f64,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_panels: usize,
}

impl<T: Scalar> Default for QuadOptions<T> {
    fn default() -> Self {
        Self {
            abs_tol: T::lit(1e-12),
            rel_tol: T::lit(1e-12),
            max_panels: 2000,
        }
    }
}

impl<T: Scalar> QuadOptions<T> {
    pub fn with_tol(abs_tol: T, rel_tol: T) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub abs_error: T,
    pub panels: usize,
}

/// One 15-point Kronrod panel: integral estimate, error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Panel<T> {
    pub a: T,
    pub b: T,
    pub value: T,
    pub error: T,
}

impl<T: Scalar> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T: Scalar> Eq for Panel<T> {}
impl<T: Scalar> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Scalar> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(Ordering::Equal)
    }
}

/// Applies the G7/K15 pair on `[a, b]`, returning the Kronrod estimate and a
/// QUADPACK-style error estimate. Also hands each node to `visit`.
pub fn gauss_kronrod15<T, F>(f: &mut F, a: T, b: T) -> Result<Panel<T>, QuadError>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    let half = T::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let abs_half_len = half_len.abs();

    let fc = f(center);
    check(fc, center)?;
    let mut res_g = fc * T::lit(WG[3]);
    let mut res_k = fc * T::lit(WGK[7]);
    let mut res_abs = res_k.abs();
    let mut fv1 = [T::zero(); 7];
    let mut fv2 = [T::zero(); 7];

    for j in 0..7 {
        let dx = half_len * T::lit(XGK[j]);
        let x1 = center - dx;
        let x2 = center + dx;
        let f1 = f(x1);
        check(f1, x1)?;
        let f2 = f(x2);
        check(f2, x2)?;
        fv1[j] = f1;
        fv2[j] = f2;
        let w = T::lit(WGK[j]);
        res_k = res_k + w * (f1 + f2);
        res_abs = res_abs + w * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g = res_g + T::lit(WG[j / 2]) * (f1 + f2);
        }
    }

    let mean = res_k * half;
    let mut res_asc = T::lit(WGK[7]) * (fc - mean).abs();
    for j in 0..7 {
        res_asc = res_asc + T::lit(WGK[j]) * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let value = res_k * half_len;
    res_abs = res_abs * abs_half_len;
    res_asc = res_asc * abs_half_len;
    let mut error = ((res_k - res_g) * half_len).abs();
    if res_asc != T::zero() && error != T::zero() {
        let scale = (T::lit(200.0) * error / res_asc).powf(T::lit(1.5));
        error = res_asc * scale.min(T::one());
    }
    let round = T::lit(50.0) * T::epsilon() * res_abs;
    if round > error {
        error = round;
    }
    Ok(Panel {
        a,
        b,
        value,
        error,
    })
}

fn check<T: Scalar>(v: T, x: T) -> Result<(), QuadError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(QuadError::NonFinite {
            x: x.to_f64_lossy(),
        })
    }
}

/// Adaptive integration of `f` over the finite interval `[a, b]`.
pub fn integrate<T, F>(mut f: F, a: T, b: T, opts: QuadOptions<T>) -> Result<QuadResult<T>, QuadError>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    integrate_with_breaks(&mut f, &[a, b], opts)
}

/// Like [`integrate`] but seeds the panel set with the given sorted breakpoints,
/// which should include both endpoints.
pub fn integrate_with_breaks<T, F>(
    f: &mut F,
    breaks: &[T],
    opts: QuadOptions<T>,
) -> Result<QuadResult<T>, QuadError>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    let mut heap = BinaryHeap::new();
    for pair in breaks.windows(2) {
        if pair[0] != pair[1] {
            heap.push(gauss_kronrod15(f, pair[0], pair[1])?);
        }
    }
    let mut panels = heap.len();
    loop {
        let (value, error) = heap
            .iter()
            .fold((T::zero(), T::zero()), |(v, e), p| (v + p.value, e + p.error));
        let tolerance = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= tolerance {
            return Ok(QuadResult {
                value,
                abs_error: error,
                panels,
            });
        }
        if panels >= opts.max_panels {
            return Err(QuadError::Budget {
                panels,
                value: value.to_f64_lossy(),
                error: error.to_f64_lossy(),
                tolerance: tolerance.to_f64_lossy(),
            });
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => {
                return Ok(QuadResult {
                    value: T::zero(),
                    abs_error: T::zero(),
                    panels: 0,
                })
            }
        };
        let mid = T::lit(0.5) * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel cannot be split further in this precision; accept it as is.
            let frozen = Panel {
                error: T::zero(),
                ..worst
            };
            heap.push(frozen);
            continue;
        }
        heap.push(gauss_kronrod15(f, worst.a, mid)?);
        heap.push(gauss_kronrod15(f, mid, worst.b)?);
        panels += 1;
    }
}

/// Adaptive integration over `[a, ∞)`.
pub fn integrate_to_infinity<T, F>(mut f: F, a: T, opts: QuadOptions<T>) -> Result<QuadResult<T>, QuadError>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    let mut g = |t: T| {
        let x = a + (T::one() - t) / t;
        f(x) / (t * t)
    };
    integrate_with_breaks(&mut g, &[T::zero(), T::one()], opts)
}
