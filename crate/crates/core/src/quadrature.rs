//! Adaptive Gauss–Kronrod (7/15) quadrature.

use crate::scalar::{lit, Scalar};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum QuadratureError {
    #[error("integration bounds must be finite and ordered, got [{0}, {1}]")]
    BadInterval(f64, f64),
    #[error("tolerance {tol} not reached after {subdivisions} subdivisions (estimated error {error})")]
    NotConverged { tol: f64, error: f64, subdivisions: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<T> {
    pub value: T,
    pub error: T,
}

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

// Gauss weights at XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_SUBDIVISIONS: usize = 20_000;

fn kronrod<T: Scalar, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let half = lit::<T>(0.5);
    let center = half * (a + b);
    let radius = half * (b - a);
    let fc = f(center);
    let mut k = fc * lit::<T>(WGK[7]);
    let mut g = fc * lit::<T>(WG[3]);
    for j in 0..7 {
        let dx = radius * lit::<T>(XGK[j]);
        let s = f(center - dx) + f(center + dx);
        k = k + s * lit::<T>(WGK[j]);
        if j % 2 == 1 {
            g = g + s * lit::<T>(WG[j / 2]);
        }
    }
    (k * radius, ((k - g) * radius).abs())
}

/// Integrates `f` over `[a, b]` to the given absolute tolerance by global
/// adaptive bisection of the interval with the largest error estimate.
pub fn integrate<T: Scalar, F: Fn(T) -> T>(f: F, a: T, b: T, abs_tol: T) -> Result<Integral<T>, QuadratureError> {
    integrate_with_breaks(f, &[a, b], abs_tol)
}

/// Like [`integrate`], over `[points[0], points[last]]` with the interior
/// points used as initial subdivision boundaries (kinks, discontinuities).
pub fn integrate_with_breaks<T: Scalar, F: Fn(T) -> T>(
    f: F,
    points: &[T],
    abs_tol: T,
) -> Result<Integral<T>, QuadratureError> {
    let mut pts: Vec<T> = points.to_vec();
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    pts.dedup();
    match (pts.first(), pts.last()) {
        (Some(&a), Some(&b)) if a.is_finite() && b.is_finite() && a < b => {}
        (Some(&a), Some(&b)) if a == b && a.is_finite() => {
            return Ok(Integral { value: T::zero(), error: T::zero() })
        }
        (a, b) => {
            let a = a.and_then(|x| x.to_f64()).unwrap_or(f64::NAN);
            let b = b.and_then(|x| x.to_f64()).unwrap_or(f64::NAN);
            return Err(QuadratureError::BadInterval(a, b));
        }
    }

    // (a, b, value, error)
    let mut pieces: Vec<(T, T, T, T)> = pts
        .windows(2)
        .map(|w| {
            let (v, e) = kronrod(&f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();

    let mut subdivisions = 0;
    loop {
        let total_err = pieces.iter().fold(T::zero(), |acc, p| acc + p.3);
        if total_err <= abs_tol {
            break;
        }
        if subdivisions >= MAX_SUBDIVISIONS {
            return Err(QuadratureError::NotConverged {
                tol: abs_tol.to_f64().unwrap_or(f64::NAN),
                error: total_err.to_f64().unwrap_or(f64::NAN),
                subdivisions,
            });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, _)| i)
            .expect("at least one piece");
        let (a, b, _, _) = pieces[worst];
        let mid = lit::<T>(0.5) * (a + b);
        if !(mid > a && mid < b) {
            // Interval cannot be split further at this precision.
            return Err(QuadratureError::NotConverged {
                tol: abs_tol.to_f64().unwrap_or(f64::NAN),
                error: total_err.to_f64().unwrap_or(f64::NAN),
                subdivisions,
            });
        }
        let (v1, e1) = kronrod(&f, a, mid);
        let (v2, e2) = kronrod(&f, mid, b);
        pieces[worst] = (a, mid, v1, e1);
        pieces.push((mid, b, v2, e2));
        subdivisions += 1;
    }

    // Sum in position order for reproducibility.
    pieces.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
    let value = pieces.iter().fold(T::zero(), |acc, p| acc + p.2);
    let error = pieces.iter().fold(T::zero(), |acc, p| acc + p.3);
    Ok(Integral { value, error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x: f64| 3.0 * x * x, 0.0, 2.0, 1e-12).unwrap();
        assert_relative_eq!(r.value, 8.0, max_relative = 1e-14);
    }

    #[test]
    fn kink_with_breakpoint() {
        let r = integrate_with_breaks(|x: f64| (-x.abs()).exp(), &[-40.0, 0.0, 40.0], 1e-12).unwrap();
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-10);
    }

    #[test]
    fn oscillatory() {
        let r = integrate(|x: f64| (50.0 * x).cos(), 0.0, 3.0, 1e-10).unwrap();
        assert_relative_eq!(r.value, (150.0f64).sin() / 50.0, epsilon = 1e-10);
    }

    #[test]
    fn single_precision() {
        let r = integrate(|x: f32| x.sin(), 0.0, std::f32::consts::PI, 1e-5).unwrap();
        assert!((r.value - 2.0).abs() < 1e-5);
    }

    #[test]
    fn bad_interval() {
        assert!(integrate(|x: f64| x, 0.0, f64::INFINITY, 1e-6).is_err());
        assert_eq!(integrate(|x: f64| x, 1.0, 1.0, 1e-6).unwrap().value, 0.0);
    }
}
